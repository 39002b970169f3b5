// SPDX-License-Identifier: Apache-2.0
#include "moeserve/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "moeserve/errors.hpp"
#include "moeserve/gating.hpp"
#include "moeserve/pareto.hpp"
#include "moeserve/planner.hpp"
#include "moeserve/profiles.hpp"
#include "moeserve/reconfig.hpp"
#include "moeserve/serialize.hpp"
#include "moeserve/simulator.hpp"

namespace moeserve::cli {

namespace {

struct LoadedConfig {
    ModelProfile model;
    HardwareProfile hw;
    std::string text;  // raw document, for sections owned by other loaders
};

LoadedConfig load_config(const std::string& path) {
    if (path.empty()) return {mixtral_sec41(), default_hardware(), ""};
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    LoadedConfig cfg;
    cfg.text = buf.str();
    std::tie(cfg.model, cfg.hw) = load_profiles(cfg.text);
    return cfg;
}

void write_output(const std::string& text, const std::string& path, const char* what) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(std::string("cannot open ") + what + " for writing: " + path);
    out << text;
}

std::vector<bytes_t> parse_mem_range(const std::string& spec) {
    std::vector<std::string> parts;
    size_t start = 0;
    while (true) {
        const size_t colon = spec.find(':', start);
        parts.push_back(spec.substr(start, colon == std::string::npos ? colon : colon - start));
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    if (parts.size() == 1) return {parse_size(parts[0])};
    if (parts.size() != 3)
        throw UsageError("--mem-range expects FROM:TO:STEP (or a single size), got '" + spec + "'");
    const bytes_t from = parse_size(parts[0]);
    const bytes_t to = parse_size(parts[1]);
    const bytes_t step = parse_size(parts[2]);
    if (step <= 0) throw UsageError("--mem-range step must be positive");
    if (to < from) throw UsageError("--mem-range upper bound below lower bound");
    std::vector<bytes_t> budgets;
    for (bytes_t b = from; b <= to; b += step) budgets.push_back(b);
    return budgets;
}

std::vector<int> parse_n4_grid(const std::string& spec) {
    std::vector<int> grid;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            const int value = std::stoi(item, &used);
            if (used != item.size() || value < 0) throw std::invalid_argument(item);
            grid.push_back(value);
        } catch (const std::exception&) {
            throw UsageError("--n4-grid expects comma-separated non-negative integers, got '" +
                             item + "'");
        }
    }
    if (grid.empty()) throw UsageError("--n4-grid must not be empty");
    return grid;
}

TaskRequest make_task(const std::string& preference, std::optional<int> n4, uint64_t seed) {
    TaskRequest task;
    task.seed = seed;
    if (preference == "throughput") {
        task.preference = Preference::Throughput;
    } else {
        task.preference = Preference::Quality;
        if (!n4) throw UsageError("--preference quality requires --n4");
        task.n4_target = n4;
    }
    return task;
}

std::string plan_summary_line(const PlacementPlan& plan, const ModelProfile& profile,
                              const HardwareProfile& hw) {
    const PlanSummary s = summarize(plan, profile, hw);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "plan: n4=%d n16=%d n_gpu=%d n_cpu=%d gpu_bytes=%lld headroom_bytes=%lld "
                  "swap_slot_bytes=%lld seed=%llu\n",
                  s.n4, profile.num_experts() - s.n4, s.n_gpu, profile.num_experts() - s.n_gpu,
                  static_cast<long long>(s.gpu_bytes), static_cast<long long>(s.headroom_bytes),
                  static_cast<long long>(plan.swap_slot_bytes),
                  static_cast<unsigned long long>(plan.seed));
    return buf;
}

// ---------------------------------------------------------------- plan ----

struct PlanOpts {
    std::string preference;
    int n4 = -1;
    bool n4_given = false;
    std::string mem;
    uint64_t seed = 0;
    std::string out;
};

int cmd_plan(const std::string& config_path, const PlanOpts& o) {
    LoadedConfig cfg = load_config(config_path);
    if (!o.mem.empty()) cfg.hw.gpu_mem_bytes = parse_size(o.mem);
    validate_hardware(cfg.hw);
    const TaskRequest task =
        make_task(o.preference, o.n4_given ? std::optional<int>(o.n4) : std::nullopt, o.seed);
    const PlacementPlan plan = make_plan(task, cfg.hw, cfg.model);
    write_plan_file(plan, cfg.model, o.out);
    std::cout << plan_summary_line(plan, cfg.model, cfg.hw);
    return 0;
}

// ------------------------------------------------------------ simulate ----

struct SimulateOpts {
    std::string plan_path;
    std::string trace_path;
    int tokens = 0;
    uint64_t seed = 0;
    std::string policy = "static";
    int lru_slots = 1;
    std::string format = "csv";
    std::string out;
};

int cmd_simulate(const std::string& config_path, const SimulateOpts& o) {
    LoadedConfig cfg = load_config(config_path);
    const PlacementPlan plan = read_plan_file(o.plan_path, cfg.model);

    GatingTrace trace;
    if (!o.trace_path.empty()) {
        trace = read_trace_file(o.trace_path);
    } else if (o.tokens > 0) {
        trace = generate_trace(cfg.model, o.tokens, o.seed);
    } else {
        throw UsageError("simulate requires --trace FILE or --tokens N");
    }

    const ResidencyPolicy policy = o.policy == "lru" ? ResidencyPolicy::lru(o.lru_slots)
                                                     : ResidencyPolicy::static_policy();
    const SimReport report = simulate(plan, trace, cfg.model, cfg.hw, policy);
    const std::string doc = o.format == "json" ? report_json(report) : report_csv(report);
    if (o.out.empty()) {
        std::cout << doc;
    } else {
        write_output(doc, o.out, "report");
        char buf[224];
        std::snprintf(buf, sizeof buf,
                      "simulated: tokens=%d throughput_tps=%s hit_rate=%s bytes_transferred=%lld "
                      "total_time_s=%s\n",
                      report.tokens, format_double(report.throughput_tps()).c_str(),
                      format_double(report.hit_rate()).c_str(),
                      static_cast<long long>(report.bytes_transferred),
                      format_double(report.total_time_s()).c_str());
        std::cout << buf;
    }
    return 0;
}

// --------------------------------------------------------- reconfigure ----

struct ReconfigureOpts {
    std::string from_path;
    std::string to_mem;
    std::string to_plan;
    std::string preference = "throughput";
    int n4 = -1;
    bool n4_given = false;
    uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
};

int cmd_reconfigure(const std::string& config_path, const ReconfigureOpts& o) {
    LoadedConfig cfg = load_config(config_path);
    const PlacementPlan from = read_plan_file(o.from_path, cfg.model);

    PlacementPlan target;
    if (!o.to_plan.empty()) {
        target = read_plan_file(o.to_plan, cfg.model);
    } else {
        HardwareProfile new_hw = cfg.hw;
        new_hw.gpu_mem_bytes = parse_size(o.to_mem);
        validate_hardware(new_hw);
        const TaskRequest task =
            make_task(o.preference, o.n4_given ? std::optional<int>(o.n4) : std::nullopt,
                      o.seed_given ? o.seed : from.seed);
        target = make_plan(task, new_hw, cfg.model);
    }

    const ReconfigPlan rp = diff_plans(from, target, cfg.model, cfg.hw);
    if (!o.out.empty()) write_reconfig_file(rp, cfg.model, o.out);
    char buf[160];
    std::snprintf(buf, sizeof buf, "reconfigure: actions=%zu bytes_moved=%lld est_downtime_s=%s\n",
                  rp.actions.size(), static_cast<long long>(rp.bytes_moved),
                  format_double(rp.est_downtime_s).c_str());
    std::cout << buf;
    return 0;
}

// -------------------------------------------------------------- pareto ----

struct ParetoOpts {
    std::string mem_range;
    std::string n4_grid;
    int tokens = 2000;
    uint64_t seed = 0;
    std::string dataset;
    std::string format = "csv";
    std::string out;
};

struct ParetoRow {
    bytes_t budget = 0;
    int n4 = 0;
    bool feasible = false;
    PlanSummary summary;
    SimReport report;
    double ppl = 0.0;
    bool on_frontier = false;
};

std::string pareto_csv(const std::vector<ParetoRow>& rows) {
    std::string out =
        "budget_bytes,n4,n_gpu,gpu_bytes,throughput_tps,hit_rate,bytes_transferred,ppl_estimate,"
        "on_frontier,status\n";
    for (const auto& r : rows) {
        out += std::to_string(r.budget) + ',' + std::to_string(r.n4) + ',';
        if (r.feasible) {
            out += std::to_string(r.summary.n_gpu) + ',' + std::to_string(r.summary.gpu_bytes) +
                   ',' + format_double(r.report.throughput_tps()) + ',' +
                   format_double(r.report.hit_rate()) + ',' +
                   std::to_string(r.report.bytes_transferred) + ',' + format_double(r.ppl) + ',' +
                   (r.on_frontier ? "1" : "0") + ",ok\n";
        } else {
            out += "-,-,-,-,-," + format_double(r.ppl) + ",0,infeasible\n";
        }
    }
    return out;
}

std::string pareto_json(const std::vector<ParetoRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["budget_bytes"] = r.budget;
        j["n4"] = r.n4;
        j["status"] = r.feasible ? "ok" : "infeasible";
        j["ppl_estimate"] = r.ppl;
        if (r.feasible) {
            j["n_gpu"] = r.summary.n_gpu;
            j["gpu_bytes"] = r.summary.gpu_bytes;
            j["throughput_tps"] = r.report.throughput_tps();
            j["hit_rate"] = r.report.hit_rate();
            j["bytes_transferred"] = r.report.bytes_transferred;
            j["on_frontier"] = r.on_frontier;
        }
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

int cmd_pareto(const std::string& config_path, const ParetoOpts& o) {
    LoadedConfig cfg = load_config(config_path);
    const std::vector<bytes_t> budgets = parse_mem_range(o.mem_range);
    const std::vector<int> grid = parse_n4_grid(o.n4_grid);
    if (o.tokens < 1) throw UsageError("--tokens must be >= 1");

    QualityAnchors anchors = anchors_wikitext2();
    if (!cfg.text.empty()) anchors = load_anchors(cfg.text, anchors);
    if (!o.dataset.empty()) {
        const auto builtin = builtin_anchors(o.dataset);
        if (!builtin)
            throw UsageError("unknown dataset '" + o.dataset + "' (known: wikitext2, ptb, c4)");
        anchors = *builtin;
    }

    std::vector<ParetoRow> rows;
    rows.reserve(grid.size() * budgets.size());
    for (int n4 : grid) {
        TaskRequest task;
        task.preference = Preference::Quality;
        task.n4_target = n4;
        task.seed = o.seed;
        const double ppl = ppl_estimate(n4, anchors, cfg.model.num_experts());
        for (const SweepEntry& entry :
             sweep_memory(budgets, task, cfg.model, cfg.hw, o.tokens, o.seed)) {
            ParetoRow row;
            row.budget = entry.budget;
            row.n4 = n4;
            row.feasible = entry.feasible;
            row.summary = entry.summary;
            row.report = entry.report;
            row.ppl = ppl;
            rows.push_back(row);
        }
    }

    std::vector<ParetoPoint> points;
    std::vector<size_t> point_rows;
    for (size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].feasible) continue;
        points.push_back({rows[i].budget, rows[i].n4, rows[i].report.throughput_tps(), rows[i].ppl,
                          rows[i].summary.gpu_bytes});
        point_rows.push_back(i);
    }
    const std::vector<char> mask = frontier_mask(points);
    for (size_t i = 0; i < points.size(); ++i) rows[point_rows[i]].on_frontier = mask[i] != 0;

    const std::string doc = o.format == "json" ? pareto_json(rows) : pareto_csv(rows);
    if (o.out.empty()) {
        std::cout << doc;
    } else {
        write_output(doc, o.out, "sweep table");
        size_t frontier_size = 0;
        for (const auto& r : rows) frontier_size += r.on_frontier ? 1 : 0;
        std::cout << "pareto: rows=" << rows.size() << " frontier=" << frontier_size << "\n";
    }
    return 0;
}

// --------------------------------------------------------------- trace ----

int cmd_trace_generate(const std::string& config_path, int tokens, uint64_t seed,
                       const std::string& out) {
    LoadedConfig cfg = load_config(config_path);
    const GatingTrace trace = generate_trace(cfg.model, tokens, seed);
    write_trace_file(trace, out);
    std::cout << "trace: tokens=" << trace.tokens << " records=" << trace.tokens * trace.num_layers
              << "\n";
    return 0;
}

int cmd_trace_validate(const std::string& config_path, const std::string& in) {
    LoadedConfig cfg = load_config(config_path);
    const GatingTrace trace = read_trace_file(in);
    if (trace.profile_fingerprint != profile_fingerprint(cfg.model))
        throw ValidationError("trace fingerprint " + fingerprint_hex(trace.profile_fingerprint) +
                              " does not match the active profile " +
                              fingerprint_hex(profile_fingerprint(cfg.model)));
    std::cout << "ok: tokens=" << trace.tokens << " layers=" << trace.num_layers
              << " experts_per_layer=" << trace.experts_per_layer << " top_k=" << trace.top_k
              << "\n";
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Planner, reconfigurer and discrete-event simulator for adaptive serving of "
                 "partially quantized MoE models"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("-c,--config", config_path, "INI config with [model] and [hardware] sections")
        ->envname("MOESERVE_CONFIG");

    PlanOpts plan_opts;
    auto* plan_cmd = app.add_subcommand("plan", "Compute and write a placement plan");
    plan_cmd->add_option("--preference", plan_opts.preference, "throughput or quality")
        ->required()
        ->check(CLI::IsMember({"throughput", "quality"}));
    auto* plan_n4 = plan_cmd->add_option("--n4", plan_opts.n4, "4-bit expert count (quality)");
    plan_cmd->add_option("--mem", plan_opts.mem, "GPU memory budget override, e.g. 30GB");
    plan_cmd->add_option("--seed", plan_opts.seed, "quantization assignment seed");
    plan_cmd->add_option("--out", plan_opts.out, "plan output path")->required();

    SimulateOpts sim_opts;
    auto* sim_cmd = app.add_subcommand("simulate", "Run token generation under a plan");
    sim_cmd->add_option("--plan", sim_opts.plan_path, "plan file")->required();
    auto* sim_trace = sim_cmd->add_option("--trace", sim_opts.trace_path, "gating trace file");
    sim_cmd->add_option("--tokens", sim_opts.tokens, "synthetic trace length")
        ->excludes(sim_trace);
    sim_cmd->add_option("--seed", sim_opts.seed, "synthetic trace seed")->excludes(sim_trace);
    sim_cmd->add_option("--policy", sim_opts.policy, "static or lru")
        ->check(CLI::IsMember({"static", "lru"}));
    sim_cmd->add_option("--lru-slots", sim_opts.lru_slots, "LRU cache capacity in expert slots");
    sim_cmd->add_option("--format", sim_opts.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    sim_cmd->add_option("--out", sim_opts.out, "report output path (default: stdout)");

    ReconfigureOpts rec_opts;
    auto* rec_cmd = app.add_subcommand("reconfigure", "Diff a deployed plan against a new target");
    rec_cmd->add_option("--from", rec_opts.from_path, "deployed plan file")->required();
    auto* rec_mem = rec_cmd->add_option("--to-mem", rec_opts.to_mem, "new GPU budget (re-plans)");
    auto* rec_plan = rec_cmd->add_option("--to-plan", rec_opts.to_plan, "explicit target plan file");
    rec_mem->excludes(rec_plan);
    rec_cmd->add_option("--preference", rec_opts.preference, "re-planning preference")
        ->check(CLI::IsMember({"throughput", "quality"}));
    auto* rec_n4 = rec_cmd->add_option("--n4", rec_opts.n4, "4-bit expert count (quality)");
    auto* rec_seed =
        rec_cmd->add_option("--seed", rec_opts.seed, "re-planning seed (default: source plan's)");
    rec_cmd->add_option("--out", rec_opts.out, "reconfiguration plan output path");

    ParetoOpts par_opts;
    auto* par_cmd = app.add_subcommand("pareto", "Sweep budgets x n4 grid and mark the frontier");
    par_cmd->add_option("--mem-range", par_opts.mem_range, "FROM:TO:STEP, e.g. 24GB:90GB:2GB")
        ->required();
    par_cmd->add_option("--n4-grid", par_opts.n4_grid, "comma-separated n4 values")->required();
    par_cmd->add_option("--tokens", par_opts.tokens, "simulated tokens per cell");
    par_cmd->add_option("--seed", par_opts.seed, "trace + assignment seed");
    par_cmd->add_option("--dataset", par_opts.dataset, "anchor dataset: wikitext2, ptb or c4");
    par_cmd->add_option("--format", par_opts.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    par_cmd->add_option("--out", par_opts.out, "table output path (default: stdout)");

    auto* trace_cmd = app.add_subcommand("trace", "Generate or validate gating traces");
    trace_cmd->require_subcommand(1);
    int trace_tokens = 0;
    uint64_t trace_seed = 0;
    std::string trace_out, trace_in;
    auto* trace_gen = trace_cmd->add_subcommand("generate", "Write a synthetic uniform trace");
    trace_gen->add_option("--tokens", trace_tokens, "trace length")->required();
    trace_gen->add_option("--seed", trace_seed, "sampling seed");
    trace_gen->add_option("--out", trace_out, "trace output path")->required();
    auto* trace_val = trace_cmd->add_subcommand("validate", "Check a trace file");
    trace_val->add_option("--in", trace_in, "trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*plan_cmd) {
            plan_opts.n4_given = plan_n4->count() > 0;
            return cmd_plan(config_path, plan_opts);
        }
        if (*sim_cmd) return cmd_simulate(config_path, sim_opts);
        if (*rec_cmd) {
            rec_opts.n4_given = rec_n4->count() > 0;
            rec_opts.seed_given = rec_seed->count() > 0;
            if (rec_opts.to_mem.empty() && rec_opts.to_plan.empty())
                throw UsageError("reconfigure requires --to-mem or --to-plan");
            return cmd_reconfigure(config_path, rec_opts);
        }
        if (*par_cmd) return cmd_pareto(config_path, par_opts);
        if (*trace_cmd) {
            if (*trace_gen) return cmd_trace_generate(config_path, trace_tokens, trace_seed, trace_out);
            return cmd_trace_validate(config_path, trace_in);
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 3;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace moeserve::cli
