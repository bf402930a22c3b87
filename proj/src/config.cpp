#include "gsmvi/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gsmvi/trace_csv.hpp"

namespace gsmvi {

ConfigError::ConfigError(const std::string& message, int line)
    : Error(line > 0 ? "config line " + std::to_string(line) + ": " + message : "config: " + message), line_(line) {}

std::string_view experiment_name(Experiment e) {
  switch (e) {
    case Experiment::fit: return "fit";
    case Experiment::dims: return "dims";
    case Experiment::cond: return "cond";
    case Experiment::nongauss: return "nongauss";
    case Experiment::vectorfield: return "vectorfield";
  }
  return "?";
}

std::string_view algorithm_name(AlgorithmChoice a) {
  switch (a) {
    case AlgorithmChoice::gsm: return "gsm";
    case AlgorithmChoice::bbvi: return "bbvi";
    case AlgorithmChoice::both: return "both";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const std::size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const std::size_t e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

// Line number of the key being parsed, for error messages.
struct Context {
  std::string key;
  int line = 0;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(key + ": " + what, line); }
};

template <typename Int>
Int to_integer(std::string_view text, const Context& ctx) {
  Int v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || end != text.data() + text.size())
    ctx.fail("expected an integer, got '" + std::string(text) + "'");
  return v;
}

double to_real(std::string_view text, const Context& ctx) {
  double v = 0.0;
  try {
    v = parse_real(text);
  } catch (const InvalidArgument&) {
    ctx.fail("expected a number, got '" + std::string(text) + "'");
  }
  if (!std::isfinite(v)) ctx.fail("value must be finite");
  return v;
}

template <typename T, typename F>
std::vector<T> to_list(std::string_view text, const Context& ctx, F convert) {
  std::vector<T> out;
  for (auto item : split_list(text)) {
    if (item.empty()) ctx.fail("empty list entry");
    out.push_back(convert(item, ctx));
  }
  return out;
}

MeanMode to_mean_mode(std::string_view text, const Context& ctx) {
  if (text == "zero") return MeanMode::zero;
  if (text == "draw") return MeanMode::standard_normal_draw;
  ctx.fail("expected zero or draw, got '" + std::string(text) + "'");
}

std::string_view mean_mode_name(MeanMode m) { return m == MeanMode::zero ? "zero" : "draw"; }

std::string join_reals(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_real(values[i]);
  return out;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

// Raw target text is resolved after all keys are read, since its defaults
// come from target_seed / target_mean and `dim`.
struct PendingTarget {
  std::string text;
  Context ctx;
};

TargetSpec resolve_target(const PendingTarget& pending, const ExperimentConfig& cfg, std::optional<Eigen::Index> dim,
                          const std::filesystem::path& base_dir) {
  const Context& ctx = pending.ctx;
  const std::string_view text = pending.text;
  const std::size_t colon = text.find(':');
  if (colon == std::string_view::npos) ctx.fail("expected gauss:..., sas:... or dsl:<path>");
  const std::string_view kind = text.substr(0, colon);
  const std::string_view body = text.substr(colon + 1);

  TargetSpec spec;
  if (kind == "dsl") {
    if (trim(body).empty()) ctx.fail("dsl target needs a program path");
    if (!dim) ctx.fail("dsl target needs the `dim` key");
    spec.kind = TargetSpec::Kind::dsl;
    std::filesystem::path p{std::string(trim(body))};
    spec.dsl_path = std::filesystem::absolute(p.is_absolute() || base_dir.empty() ? p : base_dir / p).lexically_normal();
    spec.dsl_dim = *dim;
    return spec;
  }
  if (dim) throw ConfigError("dim: only used with a dsl target");
  if (kind != "gauss" && kind != "sas") ctx.fail("unknown target kind '" + std::string(kind) + "'");
  spec.kind = kind == "gauss" ? TargetSpec::Kind::gauss : TargetSpec::Kind::sas;
  spec.sas.base.seed = cfg.target_seed;
  spec.sas.base.mean_mode = cfg.target_mean;

  std::map<std::string, std::string, std::less<>> fields;
  for (auto item : split_list(body)) {
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) ctx.fail("target field '" + std::string(item) + "' is not name=value");
    const std::string name(trim(item.substr(0, eq)));
    if (!fields.emplace(name, std::string(trim(item.substr(eq + 1)))).second)
      ctx.fail("target field '" + name + "' given twice");
  }
  std::vector<std::string_view> allowed{"d", "c", "seed", "mean"};
  if (spec.kind == TargetSpec::Kind::sas) {
    allowed.push_back("s");
    allowed.push_back("t");
  }
  for (const auto& [name, value] : fields)
    if (std::find(allowed.begin(), allowed.end(), name) == allowed.end())
      ctx.fail("unknown target field '" + name + "'");
  auto required = [&](std::string_view name) -> const std::string& {
    auto it = fields.find(name);
    if (it == fields.end()) ctx.fail("target field '" + std::string(name) + "' is required");
    return it->second;
  };
  spec.sas.base.dim = to_integer<Eigen::Index>(required("d"), ctx);
  spec.sas.base.condition_number = to_real(required("c"), ctx);
  if (auto it = fields.find("seed"); it != fields.end()) spec.sas.base.seed = to_integer<std::uint64_t>(it->second, ctx);
  if (auto it = fields.find("mean"); it != fields.end()) spec.sas.base.mean_mode = to_mean_mode(it->second, ctx);
  if (spec.kind == TargetSpec::Kind::sas) {
    spec.sas.skewness = to_real(required("s"), ctx);
    spec.sas.tail_weight = to_real(required("t"), ctx);
  }
  return spec;
}

struct KeyHandler {
  std::string_view key;
  std::function<void(ExperimentConfig&, std::string_view, const Context&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
KeyHandler int_key(std::string_view key, T ExperimentConfig::*field) {
  return {key, [field](ExperimentConfig& c, std::string_view v, const Context& ctx) { c.*field = to_integer<T>(v, ctx); },
          [field](const ExperimentConfig& c) { return std::to_string(c.*field); }};
}

KeyHandler real_key(std::string_view key, double ExperimentConfig::*field) {
  return {key, [field](ExperimentConfig& c, std::string_view v, const Context& ctx) { c.*field = to_real(v, ctx); },
          [field](const ExperimentConfig& c) { return format_real(c.*field); }};
}

KeyHandler real_list_key(std::string_view key, std::vector<double> ExperimentConfig::*field) {
  return {key,
          [field](ExperimentConfig& c, std::string_view v, const Context& ctx) {
            c.*field = to_list<double>(v, ctx, to_real);
          },
          [field](const ExperimentConfig& c) { return join_reals(c.*field); }};
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    t.push_back({"experiment",
                 [](ExperimentConfig& c, std::string_view v, const Context& ctx) {
                   for (Experiment e : {Experiment::fit, Experiment::dims, Experiment::cond, Experiment::nongauss,
                                        Experiment::vectorfield})
                     if (experiment_name(e) == v) {
                       c.experiment = e;
                       return;
                     }
                   ctx.fail("expected fit, dims, cond, nongauss or vectorfield, got '" + std::string(v) + "'");
                 },
                 [](const ExperimentConfig& c) { return std::string(experiment_name(c.experiment)); }});
    t.push_back({"algorithm",
                 [](ExperimentConfig& c, std::string_view v, const Context& ctx) {
                   for (AlgorithmChoice a : {AlgorithmChoice::gsm, AlgorithmChoice::bbvi, AlgorithmChoice::both})
                     if (algorithm_name(a) == v) {
                       c.algorithm = a;
                       return;
                     }
                   ctx.fail("expected gsm, bbvi or both, got '" + std::string(v) + "'");
                 },
                 [](const ExperimentConfig& c) { return std::string(algorithm_name(c.algorithm)); }});
    // target and dim are handled specially by the parser; listed for
    // nearest-key suggestions and echo order.
    t.push_back({"target", nullptr, nullptr});
    t.push_back({"dim", nullptr, nullptr});
    t.push_back(int_key("runs", &ExperimentConfig::runs));
    t.push_back(int_key("base_seed", &ExperimentConfig::base_seed));
    t.push_back({"output_dir",
                 [](ExperimentConfig& c, std::string_view v, const Context& ctx) {
                   if (v.empty()) ctx.fail("empty path");
                   c.output_dir = std::filesystem::path(std::string(v));
                 },
                 [](const ExperimentConfig& c) { return c.output_dir.string(); }});
    t.push_back({"metric",
                 [](ExperimentConfig& c, std::string_view v, const Context& ctx) {
                   if (v == "auto") {
                     c.metric.reset();
                     return;
                   }
                   c.metric = parse_metric(v);
                   if (!c.metric) ctx.fail("expected auto, fkl_mean, neg_elbo or kl_gauss_exact, got '" + std::string(v) + "'");
                 },
                 [](const ExperimentConfig& c) {
                   return c.metric ? std::string(metric_name(*c.metric)) : std::string("auto");
                 }});
    t.push_back(int_key("monitor_every", &ExperimentConfig::monitor_every));
    t.push_back(int_key("reference_samples", &ExperimentConfig::reference_samples));
    t.push_back(int_key("reference_seed", &ExperimentConfig::reference_seed));
    t.push_back(int_key("neg_elbo_samples", &ExperimentConfig::neg_elbo_samples));
    t.push_back(int_key("target_seed", &ExperimentConfig::target_seed));
    t.push_back({"target_mean",
                 [](ExperimentConfig& c, std::string_view v, const Context& ctx) { c.target_mean = to_mean_mode(v, ctx); },
                 [](const ExperimentConfig& c) { return std::string(mean_mode_name(c.target_mean)); }});
    t.push_back(int_key("gsm.iterations", &ExperimentConfig::gsm_iterations));
    t.push_back(int_key("gsm.batch_size", &ExperimentConfig::gsm_batch_size));
    t.push_back(int_key("bbvi.iterations", &ExperimentConfig::bbvi_iterations));
    t.push_back(int_key("bbvi.batch_size", &ExperimentConfig::bbvi_batch_size));
    t.push_back(real_list_key("bbvi.learning_rates", &ExperimentConfig::bbvi_learning_rates));
    t.push_back(real_key("bbvi.beta1", &ExperimentConfig::bbvi_beta1));
    t.push_back(real_key("bbvi.beta2", &ExperimentConfig::bbvi_beta2));
    t.push_back(real_key("bbvi.adam_epsilon", &ExperimentConfig::bbvi_adam_epsilon));
    t.push_back({"bbvi.entropy",
                 [](ExperimentConfig& c, std::string_view v, const Context& ctx) {
                   if (v == "analytic")
                     c.bbvi_entropy = EntropyEstimator::analytic;
                   else if (v == "per_sample")
                     c.bbvi_entropy = EntropyEstimator::per_sample;
                   else
                     ctx.fail("expected analytic or per_sample, got '" + std::string(v) + "'");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.bbvi_entropy == EntropyEstimator::analytic ? "analytic" : "per_sample");
                 }});
    t.push_back(real_key("init.mean", &ExperimentConfig::init_mean));
    t.push_back(real_key("init.scale", &ExperimentConfig::init_scale));
    t.push_back({"dims.values",
                 [](ExperimentConfig& c, std::string_view v, const Context& ctx) {
                   c.dims_values = to_list<int>(v, ctx, to_integer<int>);
                 },
                 [](const ExperimentConfig& c) { return join_ints(c.dims_values); }});
    t.push_back(real_key("dims.cond", &ExperimentConfig::dims_cond));
    t.push_back(real_list_key("cond.values", &ExperimentConfig::cond_values));
    t.push_back(int_key("cond.dim", &ExperimentConfig::cond_dim));
    t.push_back(int_key("nongauss.dim", &ExperimentConfig::nongauss_dim));
    t.push_back(real_key("nongauss.cond", &ExperimentConfig::nongauss_cond));
    t.push_back(real_list_key("nongauss.skews", &ExperimentConfig::nongauss_skews));
    t.push_back(real_list_key("nongauss.tails", &ExperimentConfig::nongauss_tails));
    t.push_back(int_key("vectorfield.resolution", &ExperimentConfig::vectorfield_resolution));
    t.push_back(int_key("vectorfield.samples", &ExperimentConfig::vectorfield_samples));
    t.push_back(int_key("threads", &ExperimentConfig::threads));
    return t;
  }();
  return table;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

void validate_gauss(const GaussianTargetSpec& g, const std::string& key) {
  require(g.dim >= 1, key, "dimension must be >= 1");
  require(g.condition_number >= 1.0, key, "condition number must be >= 1");
  require(g.dim > 1 || g.condition_number == 1.0, key, "a 1-D Gaussian target has condition number 1");
}

}  // namespace

const std::vector<std::string_view>& config_keys() {
  static const std::vector<std::string_view> keys = [] {
    std::vector<std::string_view> k;
    for (const auto& h : handlers()) k.push_back(h.key);
    return k;
  }();
  return keys;
}

std::string nearest_config_key(std::string_view key) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (auto k : config_keys()) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

std::string target_spec_text(const TargetSpec& spec) {
  if (spec.kind == TargetSpec::Kind::dsl) return "dsl:" + spec.dsl_path.string();
  const auto& b = spec.sas.base;
  std::string out = spec.kind == TargetSpec::Kind::gauss ? "gauss:" : "sas:";
  out += "d=" + std::to_string(b.dim) + ",c=" + format_real(b.condition_number);
  if (spec.kind == TargetSpec::Kind::sas)
    out += ",s=" + format_real(spec.sas.skewness) + ",t=" + format_real(spec.sas.tail_weight);
  out += ",seed=" + std::to_string(b.seed) + ",mean=" + std::string(mean_mode_name(b.mean_mode));
  return out;
}

void ExperimentConfig::validate() const {
  require(runs >= 1, "runs", "must be >= 1");
  require(monitor_every >= 1, "monitor_every", "must be >= 1");
  require(reference_samples >= 1, "reference_samples", "must be >= 1");
  require(neg_elbo_samples >= 1, "neg_elbo_samples", "must be >= 1");
  require(gsm_iterations >= 1, "gsm.iterations", "must be >= 1");
  require(gsm_batch_size >= 1, "gsm.batch_size", "must be >= 1");
  require(bbvi_iterations >= 1, "bbvi.iterations", "must be >= 1");
  require(bbvi_batch_size >= 1, "bbvi.batch_size", "must be >= 1");
  require(!bbvi_learning_rates.empty(), "bbvi.learning_rates", "needs at least one value");
  for (double lr : bbvi_learning_rates) require(lr >= 1e-6 && lr <= 1.0, "bbvi.learning_rates", "values must lie in [1e-6, 1]");
  require(bbvi_beta1 > 0.0 && bbvi_beta1 < 1.0, "bbvi.beta1", "must lie in (0, 1)");
  require(bbvi_beta2 > 0.0 && bbvi_beta2 < 1.0, "bbvi.beta2", "must lie in (0, 1)");
  require(bbvi_adam_epsilon > 0.0, "bbvi.adam_epsilon", "must be > 0");
  require(init_scale > 0.0, "init.scale", "must be > 0");
  require(!dims_values.empty(), "dims.values", "needs at least one value");
  for (int d : dims_values) require(d >= 1, "dims.values", "dimensions must be >= 1");
  require(dims_cond >= 1.0, "dims.cond", "must be >= 1");
  for (int d : dims_values) require(d > 1 || dims_cond == 1.0, "dims.values", "a 1-D target needs dims.cond = 1");
  require(!cond_values.empty(), "cond.values", "needs at least one value");
  require(cond_dim >= 1, "cond.dim", "must be >= 1");
  for (double c : cond_values) {
    require(c >= 1.0, "cond.values", "condition numbers must be >= 1");
    require(cond_dim > 1 || c == 1.0, "cond.values", "a 1-D target has condition number 1");
  }
  require(nongauss_dim >= 1, "nongauss.dim", "must be >= 1");
  require(nongauss_cond >= 1.0, "nongauss.cond", "must be >= 1");
  require(nongauss_dim > 1 || nongauss_cond == 1.0, "nongauss.cond", "a 1-D base has condition number 1");
  require(!nongauss_skews.empty(), "nongauss.skews", "needs at least one value");
  require(!nongauss_tails.empty(), "nongauss.tails", "needs at least one value");
  for (double t : nongauss_tails) require(t > 0.0, "nongauss.tails", "tail weights must be > 0");
  require(vectorfield_resolution >= 2, "vectorfield.resolution", "must be >= 2");
  require(vectorfield_samples >= 1, "vectorfield.samples", "must be >= 1");
  require(threads >= 0, "threads", "must be >= 0");

  if (experiment == Experiment::fit) {
    require(target.has_value(), "target", "required for experiment = fit");
  } else {
    require(!target.has_value(), "target", "only used by experiment = fit");
  }
  if (target) {
    switch (target->kind) {
      case TargetSpec::Kind::gauss:
        validate_gauss(target->sas.base, "target");
        break;
      case TargetSpec::Kind::sas:
        validate_gauss(target->sas.base, "target");
        require(target->sas.tail_weight > 0.0, "target", "tail weight t must be > 0");
        break;
      case TargetSpec::Kind::dsl:
        require(target->dsl_dim >= 1, "dim", "must be >= 1");
        require(std::filesystem::is_regular_file(target->dsl_path), "target",
                "program file '" + target->dsl_path.string() + "' does not exist");
        break;
    }
  }

  if (metric) {
    const bool dsl = target && target->kind == TargetSpec::Kind::dsl;
    if (*metric == Metric::fkl_mean)
      require(!dsl && experiment != Experiment::vectorfield, "metric",
              "fkl_mean needs a normalized target with a sampler");
    if (*metric == Metric::kl_gauss_exact) {
      const bool gaussian = experiment == Experiment::dims || experiment == Experiment::cond ||
                            (target && target->kind == TargetSpec::Kind::gauss);
      require(gaussian, "metric", "kl_gauss_exact needs a Gaussian target");
    }
  }
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  std::optional<PendingTarget> pending_target;
  std::optional<Eigen::Index> dim;
  std::map<std::string, int, std::less<>> seen;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected `key = value`", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("missing key before '='", line_no);

    const auto& table = handlers();
    const auto it = std::find_if(table.begin(), table.end(), [&](const KeyHandler& h) { return h.key == key; });
    if (it == table.end())
      throw ConfigError("unknown key '" + key + "' (did you mean '" + nearest_config_key(key) + "'?)", line_no);
    if (auto [prev, fresh] = seen.emplace(key, line_no); !fresh)
      throw ConfigError("key '" + key + "' already set on line " + std::to_string(prev->second), line_no);
    if (value.empty()) throw ConfigError(key + ": missing value", line_no);

    const Context ctx{key, line_no};
    if (key == "target") {
      pending_target = PendingTarget{std::string(value), ctx};
    } else if (key == "dim") {
      dim = to_integer<Eigen::Index>(value, ctx);
    } else {
      it->set(cfg, value, ctx);
    }
  }

  if (pending_target) {
    cfg.target = resolve_target(*pending_target, cfg, dim, base_dir);
  } else if (dim) {
    throw ConfigError("dim: only used with a dsl target", seen["dim"]);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::string echo_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& h : handlers()) {
    if (h.key == "target") {
      if (config.target) out += "target = " + target_spec_text(*config.target) + "\n";
    } else if (h.key == "dim") {
      if (config.target && config.target->kind == TargetSpec::Kind::dsl)
        out += "dim = " + std::to_string(config.target->dsl_dim) + "\n";
    } else {
      out += std::string(h.key) + " = " + h.get(config) + "\n";
    }
  }
  return out;
}

}  // namespace gsmvi
