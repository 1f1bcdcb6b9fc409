#include "flcleaner/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flcleaner/errors.hpp"
#include "flcleaner/serialize.hpp"

namespace flcleaner {

namespace {

std::string fmt_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string join_ids(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(ids[i]);
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("report: cannot open " + path);
    out << content;
    if (!out) throw Error("report: write failed for " + path);
}

// Minimal line chart: fixed [0,1] y-axis (all reported metrics are rates),
// rounds along x.
std::string svg_line_chart(const std::string& title, const std::vector<double>& values) {
    const int width = 640, height = 400;
    const double ml = 50, mr = 15, mt = 30, mb = 40;
    const double pw = width - ml - mr, ph = height - mt - mb;
    const std::size_t n = values.size();
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = tick / 4.0;
        const double y = mt + ph * (1.0 - frac);
        svg << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << width - mr << "\" y2=\""
            << y << "\" stroke=\"#ddd\"/>\n";
        svg << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_rate(frac).substr(0, 4)
            << "</text>\n";
    }
    if (n > 0) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = n == 1 ? ml + pw / 2 : ml + pw * static_cast<double>(i) / (n - 1);
            const double y = mt + ph * (1.0 - std::clamp(values[i], 0.0, 1.0));
            pts << (i ? " " : "") << x << "," << y;
        }
        svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\""
            << pts.str() << "\"/>\n";
    }
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\" font-size=\"12\">round</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace

std::string rounds_csv(const RunResult& result) {
    std::string out = "round,acc,recall,fpr,asr,delta,blocked_ids\n";
    for (const auto& r : result.rounds) {
        out += std::to_string(r.round);
        out += ',';
        out += fmt_rate(r.acc);
        out += ',';
        out += fmt_rate(r.recall);
        out += ',';
        out += fmt_rate(r.fpr);
        out += ',';
        out += fmt_rate(r.asr);
        out += ',';
        out += fmt_g(r.delta);
        out += ',';
        out += join_ids(r.blocked_ids);
        out += '\n';
    }
    return out;
}

std::string scores_csv(const RunResult& result) {
    std::string out = "round,client_id,epsilon,accepted\n";
    for (const auto& r : result.rounds) {
        for (const auto& s : r.epsilons) {
            const bool accepted = std::find(r.benign_ids.begin(), r.benign_ids.end(),
                                            s.client_id) != r.benign_ids.end();
            out += std::to_string(r.round);
            out += ',';
            out += std::to_string(s.client_id);
            out += ',';
            out += fmt_g(s.epsilon);
            out += ',';
            out += accepted ? '1' : '0';
            out += '\n';
        }
    }
    return out;
}

std::string summary_json(const RunResult& result) {
    nlohmann::ordered_json j;
    j["run_id"] = run_id(result.cfg);
    j["rounds"] = result.rounds.size();
    if (!result.rounds.empty()) {
        const auto& last = result.rounds.back();
        j["final"] = {{"acc", last.acc}, {"recall", last.recall}, {"fpr", last.fpr},
                      {"asr", last.asr}};
        double recall_sum = 0.0, fpr_sum = 0.0;
        int geomed_warnings = 0;
        std::vector<int> zero_attacker_rounds;
        for (const auto& r : result.rounds) {
            recall_sum += r.recall;
            fpr_sum += r.fpr;
            geomed_warnings += r.geomed_warnings;
            if (r.attackers_selected == 0) zero_attacker_rounds.push_back(r.round);
        }
        j["mean"] = {{"recall", recall_sum / static_cast<double>(result.rounds.size())},
                     {"fpr", fpr_sum / static_cast<double>(result.rounds.size())}};
        j["zero_attacker_rounds"] = zero_attacker_rounds;
        j["geomed_warnings"] = geomed_warnings;
    }
    j["total_ms"] = result.total_ms;

    // Echo every config key so a run is reproducible from its summary alone.
    nlohmann::ordered_json echo;
    std::istringstream lines(result.cfg.canonical_echo());
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 3);
        if (!value.empty() && value.front() == '"' && value.back() == '"')
            echo[key] = value.substr(1, value.size() - 2);
        else
            echo[key] = value;  // numbers kept as canonical strings
    }
    j["config"] = echo;
    return j.dump(2) + "\n";
}

void emit_reports(const RunResult& result, const std::string& out_dir, bool with_plots) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("report: cannot create directory " + out_dir + ": " + ec.message());

    write_file(out_dir + "/rounds.csv", rounds_csv(result));
    write_file(out_dir + "/scores.csv", scores_csv(result));
    write_file(out_dir + "/summary.json", summary_json(result));
    save_f64_vector(out_dir + "/global_model.bin", result.final_global.values);
    if (result.cvae) save_cvae(*result.cvae, out_dir + "/cvae.ckpt");

    if (with_plots) {
        fs::create_directories(out_dir + "/plots", ec);
        if (ec) throw Error("report: cannot create directory " + out_dir + "/plots");
        const auto pick = [&](auto getter) {
            std::vector<double> v;
            v.reserve(result.rounds.size());
            for (const auto& r : result.rounds) v.push_back(getter(r));
            return v;
        };
        write_file(out_dir + "/plots/acc.svg",
                   svg_line_chart("test accuracy", pick([](const RoundReport& r) { return r.acc; })));
        write_file(out_dir + "/plots/recall.svg",
                   svg_line_chart("attacker recall", pick([](const RoundReport& r) { return r.recall; })));
        write_file(out_dir + "/plots/fpr.svg",
                   svg_line_chart("benign false positive rate", pick([](const RoundReport& r) { return r.fpr; })));
        write_file(out_dir + "/plots/asr.svg",
                   svg_line_chart("backdoor success rate", pick([](const RoundReport& r) { return r.asr; })));
    }
}

} // namespace flcleaner
