#include "flcleaner/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "flcleaner/errors.hpp"

namespace flcleaner {

DefenseKind defense_kind_from_string(const std::string& name) {
    if (name == "fl_cleaner") return DefenseKind::FlCleaner;
    if (name == "mean_threshold") return DefenseKind::MeanThreshold;
    if (name == "geomed_agg") return DefenseKind::GeomedAgg;
    if (name == "none") return DefenseKind::None;
    throw ConfigError("unknown defense: " + name);
}

std::string defense_kind_to_string(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::FlCleaner: return "fl_cleaner";
        case DefenseKind::MeanThreshold: return "mean_threshold";
        case DefenseKind::GeomedAgg: return "geomed_agg";
        case DefenseKind::None: return "none";
    }
    return "?";
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string unquote(const std::string& s, int line_no) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\''))) {
        return s.substr(1, s.size() - 2);
    }
    if (s.find('"') != std::string::npos || s.find('\'') != std::string::npos)
        throw ConfigError("line " + std::to_string(line_no) + ": unbalanced quotes");
    return s;
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long n = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return n;
    } catch (...) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const unsigned long long n = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return n;
    } catch (...) {
        throw ConfigError("key '" + key + "': expected an unsigned integer, got '" + v + "'");
    }
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void ExperimentConfig::validate() const {
    if (dataset != "synthetic" && dataset != "mnist" && dataset != "fashion_mnist")
        throw ConfigError("dataset must be synthetic, mnist or fashion_mnist");
    if (dataset != "synthetic" && data_dir.empty())
        throw ConfigError("data_dir is required for IDX datasets");
    if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
    if (participation <= 0.0 || participation > 1.0)
        throw ConfigError("participation must be in (0,1]");
    if (attacker_fraction < 0.0 || attacker_fraction >= 0.5)
        throw ConfigError("attacker_fraction must be in [0, 0.5): the threat model assumes a "
                          "malicious minority");
    if (attack != AttackKind::None && attacker_fraction == 0.0)
        throw ConfigError("attack set but attacker_fraction is 0");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0,1]");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (trigger_size < 1) throw ConfigError("trigger_size must be >= 1");
    if (cvae_harvest_epochs < 1) throw ConfigError("cvae_harvest_epochs must be >= 1");
    if (cvae_warmup_epochs < 0) throw ConfigError("cvae_warmup_epochs must be >= 0");
    if (cvae_epochs < 1) throw ConfigError("cvae_epochs must be >= 1");
    if (cvae_latent_dim < 1) throw ConfigError("cvae_latent_dim must be >= 1");
    if (cvae_lr <= 0.0) throw ConfigError("cvae_lr must be > 0");
    if (cvae_batch_size < 1) throw ConfigError("cvae_batch_size must be >= 1");
    if (model != "mlp" && model != "cnn") throw ConfigError("model must be mlp or cnn");
    if (mlp_hidden < 1) throw ConfigError("mlp_hidden must be >= 1");
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (attack_target_class < 0 || attack_target_class >= num_classes)
        throw ConfigError("attack_target_class out of range");
    if (attack_pattern_size < 1) throw ConfigError("attack_pattern_size must be >= 1");

    AttackSpec probe;
    probe.kind = attack;
    probe.xi = attack_xi;
    probe.sigma = attack_sigma;
    probe.noise_fraction = attack_noise_fraction;
    probe.c = attack_c;
    probe.a = attack_a;
    probe.k_percent = attack_k_percent;
    probe.poison_rate = attack_poison_rate;
    probe.validate();
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"dataset", [&](const std::string& k, const std::string& v) { (void)k; cfg.dataset = v; }},
        {"data_dir", [&](const std::string& k, const std::string& v) { (void)k; cfg.data_dir = v; }},
        {"train_limit", [&](const std::string& k, const std::string& v) { cfg.train_limit = static_cast<int>(parse_int(v, k)); }},
        {"test_limit", [&](const std::string& k, const std::string& v) { cfg.test_limit = static_cast<int>(parse_int(v, k)); }},
        {"num_classes", [&](const std::string& k, const std::string& v) { cfg.num_classes = static_cast<int>(parse_int(v, k)); }},
        {"partition", [&](const std::string& k, const std::string& v) {
             if (v == "dirichlet") cfg.partition = PartitionScheme::Dirichlet;
             else if (v == "inverse_law") cfg.partition = PartitionScheme::InverseLaw;
             else throw ConfigError("key '" + k + "': expected dirichlet or inverse_law");
         }},
        {"dirichlet_alpha", [&](const std::string& k, const std::string& v) { cfg.dirichlet_alpha = parse_double(v, k); }},
        {"inverse_alpha", [&](const std::string& k, const std::string& v) { cfg.inverse_alpha = parse_double(v, k); }},
        {"inverse_gamma", [&](const std::string& k, const std::string& v) { cfg.inverse_gamma = static_cast<int>(parse_int(v, k)); }},
        {"inverse_r", [&](const std::string& k, const std::string& v) { cfg.inverse_r = static_cast<int>(parse_int(v, k)); }},
        {"num_clients", [&](const std::string& k, const std::string& v) { cfg.num_clients = static_cast<int>(parse_int(v, k)); }},
        {"participation", [&](const std::string& k, const std::string& v) { cfg.participation = parse_double(v, k); }},
        {"attacker_fraction", [&](const std::string& k, const std::string& v) { cfg.attacker_fraction = parse_double(v, k); }},
        {"attack", [&](const std::string& k, const std::string& v) { (void)k; cfg.attack = attack_kind_from_string(v); }},
        {"attack_xi", [&](const std::string& k, const std::string& v) { cfg.attack_xi = parse_double(v, k); }},
        {"attack_sigma", [&](const std::string& k, const std::string& v) { cfg.attack_sigma = parse_double(v, k); }},
        {"attack_noise_fraction", [&](const std::string& k, const std::string& v) { cfg.attack_noise_fraction = parse_double(v, k); }},
        {"attack_c", [&](const std::string& k, const std::string& v) { cfg.attack_c = parse_double(v, k); }},
        {"attack_a", [&](const std::string& k, const std::string& v) { cfg.attack_a = parse_double(v, k); }},
        {"attack_k_percent", [&](const std::string& k, const std::string& v) { cfg.attack_k_percent = parse_double(v, k); }},
        {"attack_poison_rate", [&](const std::string& k, const std::string& v) { cfg.attack_poison_rate = parse_double(v, k); }},
        {"attack_target_class", [&](const std::string& k, const std::string& v) { cfg.attack_target_class = static_cast<int>(parse_int(v, k)); }},
        {"attack_pattern_size", [&](const std::string& k, const std::string& v) { cfg.attack_pattern_size = static_cast<int>(parse_int(v, k)); }},
        {"defense", [&](const std::string& k, const std::string& v) { (void)k; cfg.defense = defense_kind_from_string(v); }},
        {"lambda", [&](const std::string& k, const std::string& v) { cfg.lambda = parse_double(v, k); }},
        {"layer_mask", [&](const std::string& k, const std::string& v) { (void)k; cfg.layer_mask = v; }},
        {"trigger_size", [&](const std::string& k, const std::string& v) { cfg.trigger_size = static_cast<int>(parse_int(v, k)); }},
        {"cvae_warmup_epochs", [&](const std::string& k, const std::string& v) { cfg.cvae_warmup_epochs = static_cast<int>(parse_int(v, k)); }},
        {"cvae_harvest_epochs", [&](const std::string& k, const std::string& v) { cfg.cvae_harvest_epochs = static_cast<int>(parse_int(v, k)); }},
        {"cvae_epochs", [&](const std::string& k, const std::string& v) { cfg.cvae_epochs = static_cast<int>(parse_int(v, k)); }},
        {"cvae_beta_initial", [&](const std::string& k, const std::string& v) { cfg.cvae_beta_initial = parse_double(v, k); }},
        {"cvae_beta_increment", [&](const std::string& k, const std::string& v) { cfg.cvae_beta_increment = parse_double(v, k); }},
        {"cvae_beta_step_epoch", [&](const std::string& k, const std::string& v) { cfg.cvae_beta_step_epoch = static_cast<int>(parse_int(v, k)); }},
        {"cvae_latent_dim", [&](const std::string& k, const std::string& v) { cfg.cvae_latent_dim = static_cast<int>(parse_int(v, k)); }},
        {"cvae_lr", [&](const std::string& k, const std::string& v) { cfg.cvae_lr = parse_double(v, k); }},
        {"cvae_batch_size", [&](const std::string& k, const std::string& v) { cfg.cvae_batch_size = static_cast<int>(parse_int(v, k)); }},
        {"model", [&](const std::string& k, const std::string& v) { (void)k; cfg.model = v; }},
        {"mlp_hidden", [&](const std::string& k, const std::string& v) { cfg.mlp_hidden = static_cast<int>(parse_int(v, k)); }},
        {"rounds", [&](const std::string& k, const std::string& v) { cfg.rounds = static_cast<int>(parse_int(v, k)); }},
        {"local_epochs", [&](const std::string& k, const std::string& v) { cfg.local_epochs = static_cast<int>(parse_int(v, k)); }},
        {"learning_rate", [&](const std::string& k, const std::string& v) { cfg.learning_rate = parse_double(v, k); }},
        {"batch_size", [&](const std::string& k, const std::string& v) { cfg.batch_size = static_cast<int>(parse_int(v, k)); }},
        {"seed_data", [&](const std::string& k, const std::string& v) { cfg.seed_data = parse_u64(v, k); }},
        {"seed_init", [&](const std::string& k, const std::string& v) { cfg.seed_init = parse_u64(v, k); }},
        {"seed_selection", [&](const std::string& k, const std::string& v) { cfg.seed_selection = parse_u64(v, k); }},
        {"seed_attack", [&](const std::string& k, const std::string& v) { cfg.seed_attack = parse_u64(v, k); }},
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)), line_no);
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        it->second(key, value);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string ExperimentConfig::canonical_echo() const {
    std::ostringstream out;
    out << "dataset = \"" << dataset << "\"\n";
    out << "data_dir = \"" << data_dir << "\"\n";
    out << "train_limit = " << train_limit << "\n";
    out << "test_limit = " << test_limit << "\n";
    out << "num_classes = " << num_classes << "\n";
    out << "partition = \""
        << (partition == PartitionScheme::Dirichlet ? "dirichlet" : "inverse_law") << "\"\n";
    out << "dirichlet_alpha = " << fmt_double(dirichlet_alpha) << "\n";
    out << "inverse_alpha = " << fmt_double(inverse_alpha) << "\n";
    out << "inverse_gamma = " << inverse_gamma << "\n";
    out << "inverse_r = " << inverse_r << "\n";
    out << "num_clients = " << num_clients << "\n";
    out << "participation = " << fmt_double(participation) << "\n";
    out << "attacker_fraction = " << fmt_double(attacker_fraction) << "\n";
    out << "attack = \"" << attack_kind_to_string(attack) << "\"\n";
    out << "attack_xi = " << fmt_double(attack_xi) << "\n";
    out << "attack_sigma = " << fmt_double(attack_sigma) << "\n";
    out << "attack_noise_fraction = " << fmt_double(attack_noise_fraction) << "\n";
    out << "attack_c = " << fmt_double(attack_c) << "\n";
    out << "attack_a = " << fmt_double(attack_a) << "\n";
    out << "attack_k_percent = " << fmt_double(attack_k_percent) << "\n";
    out << "attack_poison_rate = " << fmt_double(attack_poison_rate) << "\n";
    out << "attack_target_class = " << attack_target_class << "\n";
    out << "attack_pattern_size = " << attack_pattern_size << "\n";
    out << "defense = \"" << defense_kind_to_string(defense) << "\"\n";
    out << "lambda = " << fmt_double(lambda) << "\n";
    out << "layer_mask = \"" << layer_mask << "\"\n";
    out << "trigger_size = " << trigger_size << "\n";
    out << "cvae_warmup_epochs = " << cvae_warmup_epochs << "\n";
    out << "cvae_harvest_epochs = " << cvae_harvest_epochs << "\n";
    out << "cvae_epochs = " << cvae_epochs << "\n";
    out << "cvae_beta_initial = " << fmt_double(cvae_beta_initial) << "\n";
    out << "cvae_beta_increment = " << fmt_double(cvae_beta_increment) << "\n";
    out << "cvae_beta_step_epoch = " << cvae_beta_step_epoch << "\n";
    out << "cvae_latent_dim = " << cvae_latent_dim << "\n";
    out << "cvae_lr = " << fmt_double(cvae_lr) << "\n";
    out << "cvae_batch_size = " << cvae_batch_size << "\n";
    out << "model = \"" << model << "\"\n";
    out << "mlp_hidden = " << mlp_hidden << "\n";
    out << "rounds = " << rounds << "\n";
    out << "local_epochs = " << local_epochs << "\n";
    out << "learning_rate = " << fmt_double(learning_rate) << "\n";
    out << "batch_size = " << batch_size << "\n";
    out << "seed_data = " << seed_data << "\n";
    out << "seed_init = " << seed_init << "\n";
    out << "seed_selection = " << seed_selection << "\n";
    out << "seed_attack = " << seed_attack << "\n";
    return out.str();
}

std::string run_id(const ExperimentConfig& cfg) {
    const std::string echo = cfg.canonical_echo();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : echo) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace flcleaner
