// Command implementations behind mcelmap_cli. Kept in a header so tests can
// drive the commands in-process.
#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mcelmap/mcelmap.hpp"

namespace mcelmap::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitDegenerate = 2;

/// Everything a run needs. Mirrors the JSON manifest accepted by --manifest.
struct RunManifest {
  std::vector<std::string> inputs;
  std::string format = "csv";
  Eigen::Index nodes = 100;
  double lambda0 = 1.5;
  double mu0 = 1.5;
  int max_iters = 100;
  bool freeze_tuning = false;
  std::vector<std::string> methods;
  std::vector<std::string> constraints;  // "idx:x,y[,z]", idx 1-based
  std::optional<std::string> start;
  std::optional<std::string> end;
  std::string out = ".";
  std::uint64_t seed = 0;
  bool svg = false;
};

inline RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    if (j.contains("inputs")) m.inputs = j.at("inputs").get<std::vector<std::string>>();
    if (j.contains("input")) m.inputs.push_back(j.at("input").get<std::string>());
    if (j.contains("format")) m.format = j.at("format").get<std::string>();
    if (j.contains("nodes")) m.nodes = j.at("nodes").get<Eigen::Index>();
    if (j.contains("lambda0")) m.lambda0 = j.at("lambda0").get<double>();
    if (j.contains("mu0")) m.mu0 = j.at("mu0").get<double>();
    if (j.contains("max_iters")) m.max_iters = j.at("max_iters").get<int>();
    if (j.contains("freeze_tuning")) m.freeze_tuning = j.at("freeze_tuning").get<bool>();
    if (j.contains("methods")) m.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("constraints")) {
      m.constraints = j.at("constraints").get<std::vector<std::string>>();
    }
    if (j.contains("start")) m.start = j.at("start").get<std::string>();
    if (j.contains("end")) m.end = j.at("end").get<std::string>();
    if (j.contains("out")) m.out = j.at("out").get<std::string>();
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("svg")) m.svg = j.at("svg").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
  return m;
}

inline RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path.string());
  try {
    return manifest_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
}

/// "x,y[,z]" -> row vector.
inline Eigen::RowVectorXd parse_point(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const std::string_view f = detail::trim(field);
    double v = 0.0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
      throw ConfigError("cannot parse point '" + text + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("empty point '" + text + "'");
  return Eigen::Map<Eigen::RowVectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// "idx:x,y[,z]" with a 1-based node index.
inline PointConstraint parse_constraint(const std::string& text, Eigen::Index nodes) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("constraint '" + text + "' is not of the form idx:x,y[,z]");
  }
  long long idx = 0;
  const std::string head = text.substr(0, colon);
  const auto res = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (res.ec != std::errc() || res.ptr != head.data() + head.size()) {
    throw ConfigError("constraint index '" + head + "' is not an integer");
  }
  if (idx < 1 || idx > nodes) {
    throw ConfigError("constraint index " + head + " outside 1.." + std::to_string(nodes));
  }
  return {static_cast<Eigen::Index>(idx - 1), parse_point(text.substr(colon + 1))};
}

inline SynthShape parse_shape(const std::string& name) {
  static const std::map<std::string, SynthShape> shapes{{"line", SynthShape::Line},
                                                        {"arc", SynthShape::Arc},
                                                        {"scurve", SynthShape::SCurve},
                                                        {"nshape", SynthShape::NShape}};
  const auto it = shapes.find(name);
  if (it == shapes.end()) throw ConfigError("unknown shape '" + name + "'");
  return it->second;
}

/// Fixed weights for a named method; nullopt means full autotuning.
inline std::optional<CoordinateWeights> method_weights(const std::string& method) {
  if (method == "cartesian") return CoordinateWeights{1.0, 0.0, 0.0};
  if (method == "uniform") return CoordinateWeights::uniform();
  if (method == "auto") return std::nullopt;
  throw ConfigError("unknown method '" + method + "' (expected cartesian, uniform or auto)");
}

inline FitConfig fit_config(const RunManifest& m, const std::string& method) {
  FitConfig cfg;
  cfg.nodes = m.nodes;
  cfg.lambda0 = m.lambda0;
  cfg.mu0 = m.mu0;
  cfg.max_iters = m.max_iters;
  cfg.retune_every_iteration = !m.freeze_tuning;
  cfg.fixed_weights = method_weights(method);
  cfg.validate();
  return cfg;
}

inline json weights_json(const WeightState& w) {
  auto triple = [](const CoordinateWeights& c) { return json{{"x", c.x}, {"t", c.t}, {"l", c.l}}; };
  return {{"alpha", triple(w.alpha)}, {"beta", triple(w.beta)}, {"w", triple(w.w)},
          {"lambda", w.lambda},       {"mu", w.mu}};
}

inline json energies_json(const EnergyReport& e) {
  return {{"u_x", e.u_x}, {"u_t", e.u_t}, {"u_l", e.u_l}, {"u_e", e.u_e}, {"u_r", e.u_r},
          {"total", e.total()}};
}

inline json metrics_json(const MetricsReport& r) {
  return {{"frechet", r.frechet}, {"sse", r.sse}, {"angular", r.angular}, {"jerk", r.jerk}};
}

/// Files are rendered in memory and only written once every one of them is ready.
class Artifacts {
 public:
  void add(std::string name, std::string content) {
    files_.emplace_back(std::move(name), std::move(content));
  }

  void write(const fs::path& dir) const {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string());
    for (const auto& [name, content] : files_) {
      std::ofstream out(dir / name, std::ios::binary);
      out << content;
      if (!out) throw ConfigError("cannot write " + (dir / name).string());
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string matrix_csv(const Eigen::MatrixXd& pts) {
  std::ostringstream s;
  write_points_csv(s, pts);
  return s.str();
}

/// Polyline overlay of the demonstrations (grey) and the reproduction (red),
/// first two coordinates only.
inline std::string render_svg(const std::vector<Trajectory>& demos, const Eigen::MatrixXd& repro) {
  auto xy = [](const Eigen::MatrixXd& p, Eigen::Index k) {
    return p.cols() >= 2 ? Eigen::RowVector2d(p(k, 0), p(k, 1))
                         : Eigen::RowVector2d(static_cast<double>(k), p(k, 0));
  };
  std::vector<const Eigen::MatrixXd*> curves;
  for (const auto& d : demos) curves.push_back(&d.points());
  curves.push_back(&repro);
  Eigen::RowVector2d lo = Eigen::RowVector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::RowVector2d hi = -lo;
  for (const auto* c : curves) {
    for (Eigen::Index k = 0; k < c->rows(); ++k) {
      lo = lo.cwiseMin(xy(*c, k));
      hi = hi.cwiseMax(xy(*c, k));
    }
  }
  const double size = 480.0, pad = 10.0;
  const double span = std::max({hi(0) - lo(0), hi(1) - lo(1), 1e-12});
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"500\">\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const bool is_repro = i + 1 == curves.size();
    s << "<polyline fill=\"none\" stroke=\"" << (is_repro ? "red" : "grey")
      << "\" stroke-width=\"" << (is_repro ? 2 : 1) << "\" points=\"";
    for (Eigen::Index k = 0; k < curves[i]->rows(); ++k) {
      const Eigen::RowVector2d p = xy(*curves[i], k);
      s << pad + size * (p(0) - lo(0)) / span << ',' << pad + size * (hi(1) - p(1)) / span << ' ';
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline std::vector<Trajectory> load_inputs(const RunManifest& m, std::size_t which) {
  return load_demonstrations(m.inputs.at(which), parse_format(m.format));
}

inline int cmd_reproduce(const RunManifest& m, std::ostream& log = std::cerr) {
  try {
    if (m.inputs.size() != 1) throw ConfigError("reproduce takes exactly one --input");
    if (m.methods.size() > 1) throw ConfigError("reproduce takes at most one --method");
    const std::string method = m.methods.empty() ? "auto" : m.methods.front();
    const FitConfig cfg = fit_config(m, method);
    const auto demos = load_inputs(m, 0);
    const auto set = build_set(demos);

    std::vector<PointConstraint> vias;
    for (const auto& c : m.constraints) vias.push_back(parse_constraint(c, cfg.nodes));
    std::optional<Eigen::RowVectorXd> start, end;
    if (m.start) start = parse_point(*m.start);
    if (m.end) end = parse_point(*m.end);

    const FitResult r = reproduce(set, start, end, vias, cfg);

    json weights{{"method", method},
                 {"iterations", r.iterations},
                 {"converged", r.converged},
                 {"seed", m.seed},
                 {"final", weights_json(r.weights)},
                 {"history", json::array()}};
    json energies{{"final", energies_json(r.energies)}, {"history", json::array()}};
    for (const auto& rec : r.history) {
      weights["history"].push_back(weights_json(rec.weights));
      energies["history"].push_back(energies_json(rec.energies));
    }
    json metrics = metrics_json(evaluate(r.nodes, set.demos()));
    metrics["demo_jerk"] = mean_jerk(set.demos());

    Artifacts out;
    out.add("reproduction.csv", matrix_csv(r.nodes));
    out.add("weights.json", weights.dump(2) + "\n");
    out.add("energies.json", energies.dump(2) + "\n");
    out.add("metrics.json", metrics.dump(2) + "\n");
    if (m.svg) out.add("reproduction.svg", render_svg(set.demos(), r.nodes));
    out.write(m.out);
    log << "reproduce: " << r.iterations << " iterations, "
        << (r.converged ? "converged" : "not converged") << ", wrote " << m.out << "\n";
    return kExitOk;
  } catch (const DegeneracyError& e) {
    log << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

/// One reproduction per demonstration, pinned at that demo's own start and
/// end, scored against that demo.
struct BenchmarkRun {
  std::string dataset;
  std::string method;
  std::size_t demo = 0;
  std::optional<MetricsReport> metrics;  // empty when the fit failed
  std::optional<WeightState> weights;
};

inline std::vector<BenchmarkRun> run_benchmark(const RunManifest& m, std::ostream& log) {
  std::vector<BenchmarkRun> runs;
  for (std::size_t i = 0; i < m.inputs.size(); ++i) {
    const std::string name = fs::path(m.inputs[i]).stem().string();
    const auto set = build_set(load_inputs(m, i));
    for (const auto& method : m.methods) {
      const FitConfig cfg = fit_config(m, method);
      for (std::size_t j = 0; j < set.demos().size(); ++j) {
        const auto& demo = set.demos()[j];
        BenchmarkRun run{name, method, j, std::nullopt, std::nullopt};
        try {
          const auto r = reproduce(set, demo.front(), demo.back(), {}, cfg);
          run.metrics = evaluate(r.nodes, {demo});
          run.weights = r.weights;
        } catch (const DegeneracyError& e) {
          log << "warning: " << name << "/" << method << "/demo " << j + 1 << ": " << e.what()
              << "\n";
        }
        runs.push_back(std::move(run));
      }
    }
  }
  return runs;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"frechet", "sse", "angular", "jerk"};
  return names;
}

inline double metric_value(const MetricsReport& r, std::size_t k) {
  const double v[] = {r.frechet, r.sse, r.angular, r.jerk};
  return v[k];
}

inline std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

/// Method rows: mean of each metric over every successful run, then each
/// column divided by its largest (worst) entry.
inline std::string benchmark_table(const std::vector<std::string>& methods,
                                   const std::vector<BenchmarkRun>& runs) {
  const std::size_t nm = metric_names().size();
  std::vector<std::vector<std::optional<double>>> mean(methods.size(),
                                                       std::vector<std::optional<double>>(nm));
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t k = 0; k < nm; ++k) {
      double sum = 0.0;
      int count = 0;
      for (const auto& r : runs) {
        if (r.method == methods[i] && r.metrics) {
          sum += metric_value(*r.metrics, k);
          ++count;
        }
      }
      if (count > 0) mean[i][k] = sum / count;
    }
  }
  std::vector<double> worst(nm, 0.0);
  for (std::size_t k = 0; k < nm; ++k) {
    for (const auto& row : mean) {
      if (row[k]) worst[k] = std::max(worst[k], *row[k]);
    }
  }
  std::ostringstream s;
  s << "method";
  for (const auto& n : metric_names()) s << ',' << n;
  for (const auto& n : metric_names()) s << ',' << n << "_normalized";
  s << '\n';
  for (std::size_t i = 0; i < methods.size(); ++i) {
    s << methods[i];
    for (std::size_t k = 0; k < nm; ++k) s << ',' << (mean[i][k] ? format_double(*mean[i][k]) : "");
    for (std::size_t k = 0; k < nm; ++k) {
      s << ',';
      if (!mean[i][k]) continue;
      // All-zero column: every method is equally (and maximally) bad.
      s << format_double(worst[k] > 0.0 ? *mean[i][k] / worst[k] : 1.0);
    }
    s << '\n';
  }
  return s.str();
}

inline std::string boxplot_data(const std::vector<BenchmarkRun>& runs) {
  std::ostringstream s;
  s << "dataset,method,demo";
  for (const auto& n : metric_names()) s << ',' << n;
  s << ",w_x,w_t,w_l\n";
  for (const auto& r : runs) {
    s << r.dataset << ',' << r.method << ',' << r.demo + 1;
    for (std::size_t k = 0; k < metric_names().size(); ++k) {
      s << ',' << (r.metrics ? format_double(metric_value(*r.metrics, k)) : "");
    }
    if (r.weights) {
      s << ',' << format_double(r.weights->w.x) << ',' << format_double(r.weights->w.t) << ','
        << format_double(r.weights->w.l);
    } else {
      s << ",,,";
    }
    s << '\n';
  }
  return s.str();
}

inline int cmd_benchmark(RunManifest m, std::ostream& log = std::cerr) {
  try {
    if (m.inputs.empty()) throw ConfigError("benchmark needs at least one --input");
    if (m.methods.empty()) throw ConfigError("benchmark needs at least one --method");
    for (const auto& method : m.methods) fit_config(m, method);
    if (!m.constraints.empty() || m.start || m.end) {
      throw ConfigError("benchmark pins each demo's own endpoints; constraints are not accepted");
    }
    const auto runs = run_benchmark(m, log);
    const bool any = std::any_of(runs.begin(), runs.end(), [](const auto& r) { return r.metrics; });
    if (!any) {
      log << "error: every benchmark run failed\n";
      return kExitDegenerate;
    }
    Artifacts out;
    out.add("table.csv", benchmark_table(m.methods, runs));
    out.add("boxplot_data.csv", boxplot_data(runs));
    out.write(m.out);
    log << "benchmark: " << runs.size() << " runs, wrote " << m.out << "\n";
    return kExitOk;
  } catch (const DegeneracyError& e) {
    log << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

struct SynthRequest {
  std::string shape = "scurve";
  int count = 5;
  double noise = 0.0;
  double offset = 0.0;
  bool fade = false;
  Eigen::Index length = 100;
  std::uint64_t seed = 0;
  std::string format = "csv";
  std::string out;
};

inline int cmd_synth(const SynthRequest& req, std::ostream& log = std::cerr) {
  try {
    SynthOptions opt;
    opt.shape = parse_shape(req.shape);
    opt.count = req.count;
    opt.noise_sd = req.noise;
    opt.offset_sd = req.offset;
    opt.offset_profile = req.fade ? OffsetProfile::FadeToGoal : OffsetProfile::Rigid;
    opt.length = req.length;
    opt.seed = req.seed;
    const auto demos = synth_demos(opt);
    const std::string text =
        parse_format(req.format) == Format::Csv ? demos_to_csv(demos) : demos_to_json(demos);
    if (req.out.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(req.out, std::ios::binary);
      out << text;
      if (!out) throw ConfigError("cannot write " + req.out);
    }
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

/// Parses argv and dispatches. Flags override manifest values, which override defaults.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"Multi-coordinate elastic map reproductions"};
  app.require_subcommand(1);

  RunManifest flags;
  std::string manifest_path, nodes_text;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest_path, "JSON manifest with run settings");
    sub->add_option("--input", flags.inputs, "demonstration file (repeatable)");
    sub->add_option("--format", flags.format, "input format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--nodes", flags.nodes, "number of map nodes M");
    sub->add_option("--lambda0", flags.lambda0, "stretching balance constant");
    sub->add_option("--mu0", flags.mu0, "bending balance constant");
    sub->add_option("--method", flags.methods, "cartesian, uniform or auto");
    sub->add_option("--max-iters", flags.max_iters, "EM iteration cap");
    sub->add_flag("--freeze-tuning", flags.freeze_tuning, "tune weights on the first iteration only");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "recorded with the run");
  };

  auto* rep = app.add_subcommand("reproduce", "fit one reproduction");
  add_run_options(rep);
  rep->add_option("--constraint", flags.constraints, "via point idx:x,y[,z], idx from 1");
  std::string start, end;
  rep->add_option("--start", start, "start point x,y[,z]");
  rep->add_option("--end", end, "end point x,y[,z]");
  rep->add_flag("--svg", flags.svg, "also write reproduction.svg");

  auto* bench = app.add_subcommand("benchmark", "compare methods over datasets");
  add_run_options(bench);

  SynthRequest synth;
  auto* syn = app.add_subcommand("synth", "generate synthetic demonstrations");
  syn->add_option("--shape", synth.shape, "line, arc, scurve or nshape");
  syn->add_option("--count", synth.count, "number of demonstrations");
  syn->add_option("--noise", synth.noise, "per-sample noise standard deviation");
  syn->add_option("--offset", synth.offset, "per-demo offset standard deviation");
  syn->add_flag("--fade", synth.fade, "offsets fade out towards a shared goal");
  syn->add_option("--length", synth.length, "samples per demonstration");
  syn->add_option("--seed", synth.seed, "random seed");
  syn->add_option("--format", synth.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  syn->add_option("--out", synth.out, "output file (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (syn->parsed()) return cmd_synth(synth, log);

  CLI::App* sub = rep->parsed() ? rep : bench;
  RunManifest m;
  try {
    if (!manifest_path.empty()) m = load_manifest(manifest_path);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (given("--input")) m.inputs = flags.inputs;
  if (given("--format")) m.format = flags.format;
  if (given("--nodes")) m.nodes = flags.nodes;
  if (given("--lambda0")) m.lambda0 = flags.lambda0;
  if (given("--mu0")) m.mu0 = flags.mu0;
  if (given("--method")) m.methods = flags.methods;
  if (given("--max-iters")) m.max_iters = flags.max_iters;
  if (given("--freeze-tuning")) m.freeze_tuning = true;
  if (given("--out")) m.out = flags.out;
  if (given("--seed")) m.seed = flags.seed;

  if (rep->parsed()) {
    if (given("--constraint")) m.constraints = flags.constraints;
    if (given("--start")) m.start = start;
    if (given("--end")) m.end = end;
    if (given("--svg")) m.svg = true;
    return cmd_reproduce(m, log);
  }
  if (m.methods.empty() && !given("--method") && manifest_path.empty()) {
    m.methods = {"cartesian", "uniform", "auto"};
  }
  return cmd_benchmark(m, log);
}

}  // namespace mcelmap::cli
