// coreg: co-registration of paired intravascular pullbacks.
//
// Subcommands:
//   register      align an IVUS/OCT feature-file pair, write the result JSON
//   simulate      generate a synthetic pair with known ground truth
//   evaluate      agreement statistics between registration results
//   dump-matrices write the internal DP matrices as CSV
//
// Exit codes: 0 success; 2 parse/validation failure; 3 degenerate
// registration under --strict.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coreg/config.hpp"
#include "coreg/engine.hpp"
#include "coreg/matrix.hpp"
#include "coreg/metrics.hpp"
#include "coreg/pullback.hpp"
#include "coreg/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_matrix_csv(const coreg::Matrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    coreg::write_csv(m, out);
}

struct RegisterJob {
    std::string ivus_path;
    std::string oct_path;
    std::string out_path;
};

/// Runs one registration end to end. Returns the job's exit code and, on
/// failure, the diagnostic (so batch workers can report without clobbering
/// each other's stderr).
int run_register_job(const RegisterJob& job, const coreg::EngineConfig& cfg, bool strict,
                     const std::string& dump_d, const std::string& dump_c,
                     const std::string& dump_r, std::string& message) {
    try {
        const coreg::Pullback ivus = coreg::parse_pullback(job.ivus_path, coreg::Modality::IVUS);
        const coreg::Pullback oct = coreg::parse_pullback(job.oct_path, coreg::Modality::OCT);
        const coreg::RegistrationResult res = coreg::register_pullbacks(ivus, oct, cfg);
        write_text(job.out_path, coreg::registration_result_to_json(res).dump() + "\n");
        if (!dump_d.empty()) write_matrix_csv(res.D, dump_d);
        if (!dump_c.empty()) write_matrix_csv(res.C, dump_c);
        if (!dump_r.empty()) write_matrix_csv(res.R.values, dump_r);
        if (res.degenerate) {
            message = job.ivus_path + ": " + res.warnings.front();
            return strict ? 3 : 0;
        }
        return 0;
    } catch (const std::exception& e) {
        message = job.ivus_path + " / " + job.oct_path + ": " + e.what();
        return 2;
    }
}

std::vector<RegisterJob> load_batch_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open batch manifest: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw std::runtime_error("batch manifest must be a JSON array");
    }
    std::vector<RegisterJob> jobs;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("ivus") || !e.contains("oct") || !e.contains("out")) {
            throw std::runtime_error("each batch entry needs ivus, oct, out");
        }
        jobs.push_back({e["ivus"].get<std::string>(), e["oct"].get<std::string>(),
                        e["out"].get<std::string>()});
    }
    return jobs;
}

/// Accepts either a registration result ({full_mapping, per_frame_rotation})
/// or a simulator ground-truth file ({true_mapping, true_rotation}).
void load_result_vectors(const std::string& path, std::vector<double>& mapping,
                         std::vector<double>& rotation) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open result file: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw std::runtime_error("result file is not a JSON object: " + path);
    }
    const char* map_key = j.contains("full_mapping") ? "full_mapping"
                          : j.contains("true_mapping") ? "true_mapping"
                                                       : nullptr;
    const char* rot_key = j.contains("per_frame_rotation") ? "per_frame_rotation"
                          : j.contains("true_rotation")    ? "true_rotation"
                                                           : nullptr;
    if (!map_key || !rot_key) {
        throw std::runtime_error(path + ": expected full_mapping/per_frame_rotation "
                                        "or true_mapping/true_rotation");
    }
    mapping = j[map_key].get<std::vector<double>>();
    rotation = j[rot_key].get<std::vector<double>>();
    if (mapping.size() != rotation.size()) {
        throw std::runtime_error(path + ": mapping and rotation lengths differ");
    }
}

json williams_to_json(const coreg::WilliamsResult& w) {
    if (w.zero_disagreement) {
        return json{{"value", nullptr},
                    {"ci_low", nullptr},
                    {"ci_high", nullptr},
                    {"zero_disagreement", true},
                    {"resamples_used", 0}};
    }
    return json{{"value", w.wi},
                {"ci_low", w.ci_low},
                {"ci_high", w.ci_high},
                {"zero_disagreement", false},
                {"resamples_used", w.resamples_used}};
}

/// Pairwise agreement block. Top-level correlation/test fields describe
/// the longitudinal mapping; the circumferential block carries the same
/// statistics for the rotations. Statistics that are undefined on the
/// data (e.g. rank correlation of a constant) are emitted as null.
json pairwise_report(const std::vector<double>& map_a, const std::vector<double>& rot_a,
                     const std::vector<double>& map_b, const std::vector<double>& rot_b) {
    const std::vector<double> fd = coreg::frame_differences(map_a, map_b);
    const std::vector<double> ad = coreg::angle_differences(rot_a, rot_b);
    const coreg::Summary fs_ = coreg::summarize(fd);
    const coreg::Summary as_ = coreg::summarize(ad);

    auto safe_spearman = [](const std::vector<double>& x, const std::vector<double>& y) -> json {
        try {
            return coreg::spearman(x, y);
        } catch (const coreg::ZeroVariance&) {
            return nullptr;
        }
    };

    std::vector<double> rot_a_wrapped(rot_a.size()), rot_b_wrapped(rot_b.size());
    std::vector<double> signed_rot_diff(rot_a.size()), zeros(rot_a.size(), 0.0);
    for (std::size_t i = 0; i < rot_a.size(); ++i) {
        rot_a_wrapped[i] = coreg::wrap360(rot_a[i]);
        rot_b_wrapped[i] = coreg::wrap360(rot_b[i]);
        signed_rot_diff[i] = coreg::signed_angle_diff(rot_a[i] - rot_b[i]);
    }

    return json{
        {"n_frames", map_a.size()},
        {"frame_diff_median", fs_.median},
        {"frame_diff_iqr", fs_.iqr},
        {"angle_diff_median", as_.median},
        {"angle_diff_iqr", as_.iqr},
        {"ccc", coreg::ccc(map_a, map_b)},
        {"spearman_r", safe_spearman(map_a, map_b)},
        {"wilcoxon_p", coreg::wilcoxon_signed_rank(map_a, map_b).p},
        {"circumferential",
         {{"ccc", coreg::ccc(rot_a_wrapped, rot_b_wrapped)},
          {"spearman_r", safe_spearman(rot_a_wrapped, rot_b_wrapped)},
          {"wilcoxon_p", coreg::wilcoxon_signed_rank(signed_rot_diff, zeros).p}}}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"co-registration of paired intravascular pullbacks"};
    app.require_subcommand(1);

    // --- register ---
    auto* cmd_reg = app.add_subcommand("register", "register an IVUS/OCT pullback pair");
    std::string reg_ivus, reg_oct, reg_out = "registration.json", reg_config;
    std::string reg_batch, dump_d, dump_c, dump_r;
    unsigned reg_jobs = 1;
    bool strict = false;
    cmd_reg->add_option("ivus", reg_ivus, "IVUS feature file (NDJSON)");
    cmd_reg->add_option("oct", reg_oct, "OCT feature file (NDJSON)");
    cmd_reg->add_option("--config", reg_config, "engine config JSON");
    cmd_reg->add_option("--out", reg_out, "output result JSON path");
    cmd_reg->add_flag("--strict", strict, "exit 3 on degenerate registration");
    cmd_reg->add_option("--dump-d", dump_d, "write the distance matrix CSV here");
    cmd_reg->add_option("--dump-c", dump_c, "write the cumulative cost matrix CSV here");
    cmd_reg->add_option("--dump-r", dump_r, "write the rotation cost matrix CSV here");
    cmd_reg->add_option("--batch", reg_batch,
                        "JSON manifest of {ivus, oct, out} entries registered as a batch");
    cmd_reg->add_option("--jobs", reg_jobs, "batch worker threads")->default_val(1u);

    // --- simulate ---
    auto* cmd_sim = app.add_subcommand("simulate", "generate a synthetic pullback pair");
    std::string sim_config, sim_out = ".";
    std::optional<std::uint64_t> sim_seed;
    cmd_sim->add_option("--config", sim_config, "synthesis config JSON")->required();
    cmd_sim->add_option("--out", sim_out, "output directory");
    cmd_sim->add_option("--seed", sim_seed, "override the config seed");

    // --- evaluate ---
    auto* cmd_eval = app.add_subcommand("evaluate", "agreement statistics between results");
    std::vector<std::string> eval_files;
    std::string eval_out = "report.json", eval_config;
    std::optional<std::uint64_t> eval_seed;
    cmd_eval->add_option("results", eval_files, "2 or 3 result files (first = model)")
        ->expected(2, 3);
    cmd_eval->add_option("--config", eval_config, "engine config JSON (bootstrap settings)");
    cmd_eval->add_option("--out", eval_out, "output report JSON path");
    cmd_eval->add_option("--seed", eval_seed, "override the bootstrap seed");

    // --- dump-matrices ---
    auto* cmd_dump = app.add_subcommand("dump-matrices", "write D, C and R matrices as CSV");
    std::string dm_ivus, dm_oct, dm_config, dm_out = ".";
    cmd_dump->add_option("ivus", dm_ivus, "IVUS feature file")->required();
    cmd_dump->add_option("oct", dm_oct, "OCT feature file")->required();
    cmd_dump->add_option("--config", dm_config, "engine config JSON");
    cmd_dump->add_option("--out", dm_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (cmd_reg->parsed()) {
            const coreg::EngineConfig cfg = reg_config.empty()
                                                ? coreg::EngineConfig{}
                                                : coreg::load_engine_config(reg_config);
            if (!reg_batch.empty()) {
                if (!reg_ivus.empty() || !reg_oct.empty()) {
                    std::cerr << "register: --batch excludes positional inputs\n";
                    return 2;
                }
                const std::vector<RegisterJob> jobs = load_batch_manifest(reg_batch);
                std::vector<int> codes(jobs.size(), 0);
                std::vector<std::string> messages(jobs.size());
                std::atomic<std::size_t> next{0};
                const unsigned workers =
                    std::max(1u, std::min(reg_jobs, static_cast<unsigned>(jobs.size())));
                auto worker = [&]() {
                    for (;;) {
                        const std::size_t k = next.fetch_add(1);
                        if (k >= jobs.size()) return;
                        codes[k] = run_register_job(jobs[k], cfg, strict, "", "", "",
                                                    messages[k]);
                    }
                };
                std::vector<std::thread> pool;
                for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
                for (std::thread& t : pool) t.join();
                int exit_code = 0;
                for (std::size_t k = 0; k < jobs.size(); ++k) {
                    if (!messages[k].empty()) std::cerr << messages[k] << "\n";
                    exit_code = std::max(exit_code, codes[k]);
                }
                return exit_code;
            }
            if (reg_ivus.empty() || reg_oct.empty()) {
                std::cerr << "register: need IVUS and OCT inputs (or --batch)\n";
                return 2;
            }
            std::string message;
            const int code = run_register_job({reg_ivus, reg_oct, reg_out}, cfg, strict,
                                              dump_d, dump_c, dump_r, message);
            if (!message.empty()) std::cerr << message << "\n";
            return code;
        }

        if (cmd_sim->parsed()) {
            coreg::SynthConfig cfg = coreg::load_synth_config(sim_config);
            if (sim_seed) cfg.seed = *sim_seed;
            const coreg::SynthPair pair = coreg::generate_pair(cfg);
            fs::create_directories(sim_out);
            coreg::serialize_pullback(pair.ivus, (fs::path(sim_out) / "ivus.ndjson").string());
            coreg::serialize_pullback(pair.oct, (fs::path(sim_out) / "oct.ndjson").string());
            write_text((fs::path(sim_out) / "ground_truth.json").string(),
                       coreg::ground_truth_to_json(pair.truth).dump() + "\n");
            return 0;
        }

        if (cmd_eval->parsed()) {
            coreg::EngineConfig cfg = eval_config.empty() ? coreg::EngineConfig{}
                                                          : coreg::load_engine_config(eval_config);
            if (eval_seed) cfg.bootstrap_seed = *eval_seed;
            std::vector<std::vector<double>> maps(eval_files.size()), rots(eval_files.size());
            for (std::size_t k = 0; k < eval_files.size(); ++k) {
                load_result_vectors(eval_files[k], maps[k], rots[k]);
                if (maps[k].size() != maps[0].size()) {
                    throw std::runtime_error("result files disagree on frame count");
                }
            }
            json report;
            if (eval_files.size() == 2) {
                report = pairwise_report(maps[0], rots[0], maps[1], rots[1]);
            } else {
                report["model_vs_a1"] = pairwise_report(maps[0], rots[0], maps[1], rots[1]);
                report["model_vs_a2"] = pairwise_report(maps[0], rots[0], maps[2], rots[2]);
                report["a1_vs_a2"] = pairwise_report(maps[1], rots[1], maps[2], rots[2]);
                const auto wi_frames = coreg::williams_index(
                    coreg::frame_differences(maps[0], maps[1]),
                    coreg::frame_differences(maps[0], maps[2]),
                    coreg::frame_differences(maps[1], maps[2]), cfg.bootstrap_seed,
                    cfg.bootstrap_resamples);
                const auto wi_angles = coreg::williams_index(
                    coreg::angle_differences(rots[0], rots[1]),
                    coreg::angle_differences(rots[0], rots[2]),
                    coreg::angle_differences(rots[1], rots[2]), cfg.bootstrap_seed,
                    cfg.bootstrap_resamples);
                report["williams_index"] = {{"frames", williams_to_json(wi_frames)},
                                            {"angles", williams_to_json(wi_angles)}};
            }
            write_text(eval_out, report.dump() + "\n");
            return 0;
        }

        if (cmd_dump->parsed()) {
            const coreg::EngineConfig cfg = dm_config.empty()
                                                ? coreg::EngineConfig{}
                                                : coreg::load_engine_config(dm_config);
            const coreg::Pullback ivus = coreg::parse_pullback(dm_ivus, coreg::Modality::IVUS);
            const coreg::Pullback oct = coreg::parse_pullback(dm_oct, coreg::Modality::OCT);
            const coreg::RegistrationResult res = coreg::register_pullbacks(ivus, oct, cfg);
            fs::create_directories(dm_out);
            write_matrix_csv(res.D, (fs::path(dm_out) / "d.csv").string());
            write_matrix_csv(res.C, (fs::path(dm_out) / "c.csv").string());
            write_matrix_csv(res.R.values, (fs::path(dm_out) / "r.csv").string());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
