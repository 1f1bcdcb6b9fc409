// flcleaner command-line front end:
//   flcleaner run --config cfg.toml --out results/   simulate an FL session
//   flcleaner partition --config cfg.toml --inspect  dump the client partition
//   flcleaner oracle geomed|trust ...                brute-force references
//   flcleaner gen-data --out dir                     write a synthetic IDX pair
// Exit codes: 0 success, 2 config error, 3 runtime abort.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flcleaner/config.hpp"
#include "flcleaner/dataset.hpp"
#include "flcleaner/errors.hpp"
#include "flcleaner/harness.hpp"
#include "flcleaner/oracles.hpp"
#include "flcleaner/partition.hpp"
#include "flcleaner/report.hpp"
#include "flcleaner/rng.hpp"

namespace {

using namespace flcleaner;

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        return buf.str();
    }
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_run(const std::string& config_path, const std::string& out_dir, bool plots) {
    const ExperimentConfig cfg = load_config(config_path);
    std::cout << "run " << run_id(cfg) << ": " << cfg.rounds << " rounds, "
              << cfg.num_clients << " clients, attack=" << attack_kind_to_string(cfg.attack)
              << ", defense=" << defense_kind_to_string(cfg.defense) << "\n";
    const RunResult result = run_experiment(cfg);
    emit_reports(result, out_dir, plots);
    for (const auto& r : result.rounds)
        std::cout << "round " << r.round << ": acc=" << r.acc << " recall=" << r.recall
                  << " fpr=" << r.fpr << " asr=" << r.asr << " blocked=" << r.blocked_ids.size()
                  << "\n";
    std::cout << "wrote " << out_dir << "/rounds.csv (" << result.total_ms << " ms)\n";
    return 0;
}

int cmd_partition(const std::string& config_path, const std::string& out_path) {
    const ExperimentConfig cfg = load_config(config_path);
    Dataset train;
    if (cfg.dataset == "synthetic") {
        train = synthetic_split(cfg.train_limit > 0 ? cfg.train_limit : 10000,
                                cfg.test_limit > 0 ? cfg.test_limit : 2000, cfg.num_classes,
                                derive_seed(cfg.seed_data, 0x636f7270ULL))
                    .first;
    } else {
        train = load_idx(cfg.data_dir + "/train-images-idx3-ubyte",
                         cfg.data_dir + "/train-labels-idx1-ubyte");
    }
    const Partition p =
        cfg.partition == PartitionScheme::Dirichlet
            ? partition_dirichlet(train, cfg.num_clients, cfg.dirichlet_alpha, cfg.seed_data)
            : partition_inverse_law(train, cfg.num_clients, cfg.inverse_alpha, cfg.inverse_gamma,
                                    cfg.inverse_r, cfg.seed_data);
    const std::string json = partition_to_json(p);
    if (out_path.empty()) {
        std::cout << json << "\n";
    } else {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot open " + out_path);
        out << json << "\n";
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_oracle_geomed(const std::string& input, double step) {
    const auto j = nlohmann::json::parse(read_input(input));
    const auto points = j.get<std::vector<std::vector<double>>>();
    const auto [median, objective] = geomed_grid_search(points, step);
    nlohmann::json out;
    out["median"] = median;
    out["objective"] = objective;
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_oracle_trust(const std::string& input, double lambda) {
    const auto j = nlohmann::json::parse(read_input(input));
    const auto epsilons = j.get<std::vector<double>>();
    const auto benign = trust_first_gap_search(epsilons, lambda);
    nlohmann::json out;
    out["benign"] = benign;
    const auto [mn, mx] = std::minmax_element(epsilons.begin(), epsilons.end());
    out["delta"] = lambda * (*mx - *mn);
    std::cout << out.dump() << "\n";
    return 0;
}

int cmd_gen_data(const std::string& out_dir, int train_count, int test_count, int classes,
                 std::uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    const auto [train, test] =
        synthetic_split(train_count, test_count, classes, derive_seed(seed, 0x636f7270ULL));
    write_idx(train, out_dir + "/train-images-idx3-ubyte", out_dir + "/train-labels-idx1-ubyte");
    write_idx(test, out_dir + "/t10k-images-idx3-ubyte", out_dir + "/t10k-labels-idx1-ubyte");
    std::cout << "wrote " << train.size() << " train / " << test.size() << " test samples to "
              << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated-learning poisoning defense simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    bool plots = false;
    auto* run = app.add_subcommand("run", "execute an experiment from a config file");
    run->add_option("--config", config_path, "config file path")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--plots", plots, "also write plots/*.svg");

    std::string part_out;
    bool inspect = false;
    auto* part = app.add_subcommand("partition", "build and dump the client partition");
    part->add_option("--config", config_path, "config file path")->required();
    part->add_flag("--inspect", inspect, "print the partition as JSON");
    part->add_option("--out", part_out, "write JSON here instead of stdout");

    auto* oracle = app.add_subcommand("oracle", "run a brute-force reference");
    std::string oracle_input = "-";
    double grid_step = 1e-3, lambda = 0.3;
    auto* geo = oracle->add_subcommand("geomed", "2-D grid search for the geometric median");
    geo->add_option("--input", oracle_input, "JSON [[x,y],...] file or - for stdin");
    geo->add_option("--step", grid_step, "grid spacing");
    auto* trust = oracle->add_subcommand("trust", "exhaustive first-gap acceptance search");
    trust->add_option("--input", oracle_input, "JSON [eps,...] file or - for stdin");
    trust->add_option("--lambda", lambda, "gap threshold share of the error range");
    oracle->require_subcommand(1);

    std::string gen_out = "data";
    int gen_train = 10000, gen_test = 2000, gen_classes = 10;
    std::uint64_t gen_seed = 1;
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as IDX files");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--train", gen_train, "train sample count");
    gen->add_option("--test", gen_test, "test sample count");
    gen->add_option("--classes", gen_classes, "class count");
    gen->add_option("--seed", gen_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, plots);
        if (part->parsed()) {
            (void)inspect;  // --inspect is the only mode; kept for interface stability
            return cmd_partition(config_path, part_out);
        }
        if (oracle->parsed()) {
            if (geo->parsed()) return cmd_oracle_geomed(oracle_input, grid_step);
            return cmd_oracle_trust(oracle_input, lambda);
        }
        if (gen->parsed()) return cmd_gen_data(gen_out, gen_train, gen_test, gen_classes, gen_seed);
    } catch (const flcleaner::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
