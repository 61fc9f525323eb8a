// cora: planning and simulation toolkit for SmartNIC state offloading.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cora/device_model.hpp"
#include "cora/manifest.hpp"
#include "cora/nf_ir.hpp"
#include "cora/planner.hpp"
#include "cora/sim.hpp"
#include "cora/trace.hpp"
#include "cora/trace_synth.hpp"

namespace fs = std::filesystem;
using cora::format_double;
using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cora::ParseError("cannot open " + path, 0, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

cora::ProgramIR load_program(const std::string& path) {
  return cora::parse_program(slurp(path));
}

void write_manifest(const std::string& command, const std::vector<std::string>& inputs,
                    uint64_t seed, const std::vector<std::string>& outputs,
                    const std::string& path) {
  cora::RunManifest m;
  m.command = command;
  m.seed = seed;
  for (const auto& i : inputs) m.input_digests[i] = cora::file_digest_hex(i);
  m.outputs = outputs;
  m.write(path);
}

// Reapply a saved plan's placements to freshly derived aggregates.
cora::AllocationPlan load_plan(const std::string& path, const cora::ProgramIR& ir,
                               const cora::TrafficTrace& trace) {
  json j = json::parse(slurp(path));
  std::map<std::pair<std::string, std::string>, std::string> placements;
  for (const auto& a : j.at("assignments"))
    placements[{a.at("block").get<std::string>(), a.at("aggregate").get<std::string>()}] =
        a.at("placement").get<std::string>();
  cora::AllocationPlan plan;
  for (const auto& pair : cora::aggregate_flows(ir, trace)) {
    auto it = placements.find({pair.block, pair.aggregate_id});
    if (it == placements.end())  // "*" places every aggregate of the block
      it = placements.find({pair.block, "*"});
    plan.assignments.push_back(
        {pair, it != placements.end() ? it->second : std::string(cora::kCpuPlacement)});
  }
  return plan;
}

void write_report(const cora::ThroughputReport& rep, const std::string& path,
                  const std::string& format) {
  std::ofstream out(path);
  if (format == "csv") {
    out << "block,tier,op,mode,size_bytes,intensity\n";
    for (const auto& r : rep.access_table)
      out << r.block << "," << r.cls.tier << "," << (r.cls.is_write ? "write" : "read")
          << "," << (r.cls.atomic ? "atomic" : "bulk") << "," << r.cls.size_bytes << ","
          << format_double(r.intensity) << "\n";
    out << "# t_lockfree_pps," << format_double(rep.t_lockfree) << "\n";
    out << "# t_program_pps," << format_double(rep.t_program) << "\n";
    return;
  }
  json j;
  j["t_lockfree_pps"] = rep.t_lockfree;
  j["t_program_pps"] = rep.t_program;
  j["drop_risk"] = rep.any_drop_risk;
  json rows = json::array();
  for (const auto& r : rep.access_table)
    rows.push_back({{"block", r.block},
                    {"tier", r.cls.tier},
                    {"op", r.cls.is_write ? "write" : "read"},
                    {"mode", r.cls.atomic ? "atomic" : "bulk"},
                    {"size_bytes", r.cls.size_bytes},
                    {"intensity", r.intensity}});
  j["access_table"] = rows;
  json locks = json::array();
  for (const auto& l : rep.locks)
    locks.push_back({{"block", l.block},
                     {"element", l.element},
                     {"t_lock", l.t_lock},
                     {"volume", l.volume},
                     {"drop_risk", l.drop_risk}});
  j["locks"] = locks;
  out << j.dump(2) << "\n";
}

std::vector<cora::ScheduleEntry> load_schedule(const std::string& path) {
  json j = json::parse(slurp(path));
  std::vector<cora::ScheduleEntry> sched;
  for (const auto& e : j) {
    cora::ScheduleEntry s;
    s.time_s = e.value("time_s", 0.0);
    s.scale_factor = e.value("scale_factor", 1.0);
    if (e.contains("table_size_override"))
      for (auto it = e["table_size_override"].begin(); it != e["table_size_override"].end();
           ++it)
        s.table_size_override[it.key()] = it.value().get<uint64_t>();
    sched.push_back(s);
  }
  return sched;
}

struct CommonArgs {
  std::string program, trace, profile, out_dir = ".", format = "json";
  uint64_t seed = 1;
  double target_pps = 0;
};

int run_fit(const std::string& in_csv, const std::string& out_path,
            const std::string& base_profile, const std::string& report_path) {
  std::ifstream in(in_csv);
  if (!in) throw cora::ParseError("cannot open " + in_csv, 0, 0);
  std::map<std::string, std::vector<std::pair<double, double>>> samples;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("curve,", 0) == 0) continue;  // header
    std::istringstream ls(line);
    std::string curve, i_s, t_s;
    if (!std::getline(ls, curve, ',') || !std::getline(ls, i_s, ',') ||
        !std::getline(ls, t_s))
      throw cora::ParseError("bad fit row", lineno, 1);
    samples[curve].push_back({std::stod(i_s), std::stod(t_s)});
  }
  if (samples.empty()) throw cora::ParseError("no samples in " + in_csv, 0, 0);

  cora::DeviceProfile profile;
  if (!base_profile.empty()) profile = cora::DeviceProfile::load_json(base_profile);

  std::ofstream rep(report_path);
  rep << "curve,t_max,a,b,mean_rel_error\n";
  double err_sum = 0;
  bool degraded = false;
  for (const auto& [curve, pts] : samples) {
    try {
      cora::FitResult r = cora::fit_roofline(pts);
      profile.curves[curve] = r.params;
      err_sum += r.mean_rel_error;
      rep << curve << "," << format_double(r.params.t_max) << ","
          << format_double(r.params.a) << "," << format_double(r.params.b) << ","
          << format_double(r.mean_rel_error) << "\n";
    } catch (const cora::ModelError& e) {
      degraded = true;
      rep << curve << ",,,,fit_failed: " << e.what() << "\n";
    }
  }
  rep << "# mean," << format_double(err_sum / double(samples.size())) << "\n";
  std::ofstream out(out_path);
  out << profile.to_json() << "\n";
  std::cout << "fitted " << samples.size() << " curves, mean rel error "
            << format_double(err_sum / double(samples.size())) << "\n";
  return degraded ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"state-offload planning and simulation toolkit"};
  app.require_subcommand(1);
  CommonArgs args;

  // fit
  auto* fit = app.add_subcommand("fit", "fit memory throughput curves from a profiling CSV");
  std::string fit_in, fit_out = "profile.json", fit_base, fit_report = "fit_report.csv";
  fit->add_option("--in", fit_in, "profiling CSV: curve,intensity,throughput_ops")
      ->required();
  fit->add_option("--out", fit_out, "output profile JSON");
  fit->add_option("--base-profile", fit_base, "profile template supplying rules/capacities");
  fit->add_option("--report", fit_report, "per-curve error report CSV");

  // predict
  auto* predict = app.add_subcommand("predict", "estimate program throughput on a device");
  std::string predict_plan, predict_out = "report";
  predict->add_option("--program", args.program)->required();
  predict->add_option("--trace", args.trace)->required();
  predict->add_option("--profile", args.profile)->required();
  predict->add_option("--plan", predict_plan, "plan JSON; omitted = everything on the CPU");
  predict->add_option("--out", predict_out, "report name without extension");
  predict->add_option("--out-dir", args.out_dir);
  predict->add_option("--seed", args.seed);
  predict->add_option("--format", args.format)->check(CLI::IsMember({"csv", "json"}));

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "compute a state allocation plan");
  plan_cmd->add_option("--program", args.program)->required();
  plan_cmd->add_option("--trace", args.trace)->required();
  plan_cmd->add_option("--profile", args.profile)->required();
  plan_cmd->add_option("--target-pps", args.target_pps)->required();
  plan_cmd->add_option("--out-dir", args.out_dir);
  plan_cmd->add_option("--seed", args.seed);

  // synth-trace
  auto* synth = app.add_subcommand("synth-trace", "generate a traffic trace from a spec");
  std::string synth_spec, synth_out = "trace.csv";
  synth->add_option("--spec", synth_spec, "trace spec JSON")->required();
  synth->add_option("--out", synth_out);
  synth->add_option("--seed", args.seed);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run the epoch-based runtime simulation");
  std::string sim_plan, sim_sched;
  double sim_duration = 1.0, sim_threshold = -1;
  std::string sim_policy = "heavy_first";
  sim_cmd->add_option("--program", args.program)->required();
  sim_cmd->add_option("--trace", args.trace)->required();
  sim_cmd->add_option("--profile", args.profile)->required();
  sim_cmd->add_option("--plan", sim_plan)->required();
  sim_cmd->add_option("--schedule", sim_sched, "JSON list of {time_s, scale_factor, ...}");
  sim_cmd->add_option("--duration", sim_duration, "seconds");
  sim_cmd->add_option("--threshold", sim_threshold, "idle-time threshold; <0 = controller off");
  sim_cmd->add_option("--policy", sim_policy)->check(CLI::IsMember({"heavy_first", "random"}));
  sim_cmd->add_option("--out-dir", args.out_dir);
  sim_cmd->add_option("--seed", args.seed);

  // calibrate-threshold
  auto* cal = app.add_subcommand("calibrate-threshold",
                                 "derive the overload idle-time threshold offline");
  std::string cal_plan;
  double cal_fraction = 0.9;
  cal->add_option("--program", args.program)->required();
  cal->add_option("--trace", args.trace)->required();
  cal->add_option("--profile", args.profile)->required();
  cal->add_option("--plan", cal_plan)->required();
  cal->add_option("--load-fraction", cal_fraction);
  cal->add_option("--seed", args.seed);

  // sweep-offload
  auto* sweep = app.add_subcommand(
      "sweep-offload", "offloading ratio across mean flow sizes and branch ratios");
  std::string sweep_spec, sweep_out = "sweep.csv";
  std::vector<double> sweep_means{10, 100, 1000};
  std::vector<double> sweep_ratios{0.1, 0.5, 0.9};
  sweep->add_option("--program", args.program)->required();
  sweep->add_option("--profile", args.profile)->required();
  sweep->add_option("--spec", sweep_spec, "two-branch trace spec template")->required();
  sweep->add_option("--target-pps", args.target_pps)->required();
  sweep->add_option("--mean-flow-size", sweep_means, "mean flow volumes to sweep");
  sweep->add_option("--ratio", sweep_ratios, "first-branch volume shares to sweep");
  sweep->add_option("--out", sweep_out);
  sweep->add_option("--seed", args.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(args.out_dir);

    if (*fit) {
      int rc = run_fit(fit_in, fit_out, fit_base, fit_report);
      write_manifest("fit", {fit_in, fit_base.empty() ? fit_in : fit_base}, 0,
                     {fit_out, fit_report}, fit_out + ".manifest.json");
      return rc;
    }

    if (*predict) {
      auto ir = load_program(args.program);
      auto trace = cora::TrafficTrace::load_csv(args.trace);
      auto profile = cora::DeviceProfile::load_json(args.profile);
      cora::AllocationPlan plan;
      if (!predict_plan.empty())
        plan = load_plan(predict_plan, ir, trace);
      else
        for (const auto& pair : cora::aggregate_flows(ir, trace))
          plan.assignments.push_back({pair, cora::kCpuPlacement});
      cora::PerformanceTarget target{double(trace.total_volume())};
      auto eval = cora::evaluate_plan(ir, trace, profile, target, plan.assignments);

      // Rebuild the model report for the offloaded set to expose the access table.
      std::map<std::pair<std::string, std::string>, cora::OffloadedBlock> offload;
      uint64_t total = trace.total_volume();
      for (const auto& a : plan.assignments) {
        if (a.placement == cora::kCpuPlacement) continue;
        auto [it, fresh] = offload.try_emplace({a.pair.block, a.placement});
        if (fresh) {
          it->second.block = a.pair.block;
          it->second.tier = a.placement;
          it->second.traffic_fraction = 0;
        }
        it->second.traffic_fraction +=
            total > 0 ? a.pair.volume_pps / double(total) : 0;
        if (ir.block(a.pair.block).has_write)
          it->second.element_volumes.push_back(
              {a.pair.block, a.pair.aggregate_id, double(a.pair.volume_pps)});
      }
      std::vector<cora::OffloadedBlock> blocks;
      for (auto& [_, ob] : offload) blocks.push_back(ob);
      auto rep = cora::estimate_program(profile, ir, blocks);

      std::string ext = args.format == "csv" ? ".csv" : ".json";
      std::string out_path = (fs::path(args.out_dir) / (predict_out + ext)).string();
      write_report(rep, out_path, args.format);
      write_manifest("predict", {args.program, args.trace, args.profile}, args.seed,
                     {out_path}, out_path + ".manifest.json");
      std::cout << "t_program_pps " << format_double(rep.t_program) << "\n";
      return eval.drop_risk ? 1 : 0;
    }

    if (*plan_cmd) {
      auto ir = load_program(args.program);
      auto trace = cora::TrafficTrace::load_csv(args.trace);
      auto profile = cora::DeviceProfile::load_json(args.profile);
      auto p = cora::plan(ir, trace, profile, {args.target_pps});
      std::string plan_path = (fs::path(args.out_dir) / "plan.json").string();
      std::string summary_path = (fs::path(args.out_dir) / "plan_summary.txt").string();
      {
        std::ofstream out(plan_path);
        out << p.to_json() << "\n";
      }
      {
        std::ofstream out(summary_path);
        size_t nic = 0;
        for (const auto& a : p.assignments)
          if (a.placement != cora::kCpuPlacement) ++nic;
        out << "pairs " << p.assignments.size() << ", on_nic " << nic << "\n"
            << "cpu_objective " << format_double(p.cpu_objective) << "\n"
            << "predicted_nic_pps " << format_double(p.predicted_nic_pps) << "\n"
            << "offloading_ratio " << format_double(cora::offloading_ratio(ir, p)) << "\n"
            << "meets_target " << (p.meets_target ? "yes" : "no") << "\n"
            << "shortfall_pps " << format_double(p.shortfall_pps) << "\n"
            << "candidates_evaluated " << p.candidates_evaluated << "\n";
      }
      write_manifest("plan", {args.program, args.trace, args.profile}, args.seed,
                     {plan_path, summary_path}, plan_path + ".manifest.json");
      std::cout << (p.meets_target ? "plan meets target\n" : "plan falls short of target\n");
      return p.meets_target ? 0 : 1;
    }

    if (*synth) {
      auto spec = cora::TraceSynthSpec::load_json(synth_spec);
      auto trace = cora::synthesize_trace(spec, args.seed);
      trace.save_csv(synth_out);
      write_manifest("synth-trace", {synth_spec}, args.seed, {synth_out},
                     synth_out + ".manifest.json");
      std::cout << trace.flows.size() << " flows, total "
                << format_double(double(trace.total_volume())) << " pps\n";
      return 0;
    }

    if (*sim_cmd) {
      auto ir = load_program(args.program);
      auto trace = cora::TrafficTrace::load_csv(args.trace);
      auto profile = cora::DeviceProfile::load_json(args.profile);
      auto plan = load_plan(sim_plan, ir, trace);
      cora::SimConfig cfg;
      cfg.seed = args.seed;
      cfg.idle_threshold = sim_threshold;
      cfg.policy = sim_policy == "random" ? cora::VictimPolicy::Random
                                          : cora::VictimPolicy::HeavyFirst;
      std::vector<cora::ScheduleEntry> sched = {{0.0, 1.0, {}}};
      if (!sim_sched.empty()) sched = load_schedule(sim_sched);
      cora::Simulator sim(ir, trace, profile, plan, cfg);
      auto timeline = sim.run(sched, sim_duration);
      std::string tl_path = (fs::path(args.out_dir) / "timeline.csv").string();
      std::string mg_path = (fs::path(args.out_dir) / "migrations.csv").string();
      timeline.save_csv(tl_path, mg_path);
      write_manifest("simulate",
                     {args.program, args.trace, args.profile, sim_plan}, args.seed,
                     {tl_path, mg_path}, tl_path + ".manifest.json");
      std::cout << "arrived " << timeline.total_arrived << ", dropped "
                << timeline.total_dropped
                << (timeline.device_malfunction ? ", device malfunction" : "") << "\n";
      return timeline.device_malfunction ? 1 : 0;
    }

    if (*cal) {
      auto ir = load_program(args.program);
      auto trace = cora::TrafficTrace::load_csv(args.trace);
      auto profile = cora::DeviceProfile::load_json(args.profile);
      auto plan = load_plan(cal_plan, ir, trace);
      cora::SimConfig cfg;
      cfg.seed = args.seed;
      double t = cora::Simulator::calibrate_threshold(ir, trace, profile, plan, cfg,
                                                      cal_fraction);
      std::cout << "idle_threshold_s " << format_double(t) << "\n";
      return 0;
    }

    if (*sweep) {
      auto ir = load_program(args.program);
      auto profile = cora::DeviceProfile::load_json(args.profile);
      auto base = cora::TraceSynthSpec::load_json(sweep_spec);
      if (base.branches.size() != 2)
        throw cora::ParseError("sweep spec needs exactly two branches", 0, 0);
      std::ofstream out(sweep_out);
      out << "mean_flow_size,branch_ratio,offloading_ratio,meets_target\n";
      for (double ratio : sweep_ratios) {
        for (double mean : sweep_means) {
          cora::TraceSynthSpec spec = base;
          spec.mean_volume = mean;
          spec.branches[0].ratio = ratio;
          spec.branches[1].ratio = 1.0 - ratio;
          auto trace = cora::synthesize_trace(spec, args.seed);
          auto p = cora::plan(ir, trace, profile, {args.target_pps});
          out << format_double(mean) << "," << format_double(ratio) << ","
              << format_double(cora::offloading_ratio(ir, p)) << ","
              << (p.meets_target ? 1 : 0) << "\n";
        }
      }
      write_manifest("sweep-offload", {args.program, args.profile, sweep_spec}, args.seed,
                     {sweep_out}, sweep_out + ".manifest.json");
      return 0;
    }
  } catch (const cora::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const cora::ModelError& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return 1;
  } catch (const cora::PlanError& e) {
    std::cerr << "planning error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
