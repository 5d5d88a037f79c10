#include "dlrs/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "dlrs/error.hpp"
#include "dlrs/training.hpp"

namespace dlrs::harness {

namespace fs = std::filesystem;

std::string_view to_string(Workload w) noexcept {
  switch (w) {
    case Workload::kPinn: return "pinn";
    case Workload::kMnist: return "mnist";
    case Workload::kSynthetic: return "synthetic";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void fail(const std::string& key, int line, const std::string& message) {
  if (line > 0) throw ConfigError(key, "line " + std::to_string(line) + ": " + message);
  throw ConfigError(key, message);
}

const std::set<std::string>& common_keys() {
  static const std::set<std::string> keys{
      "name",          "workload",          "seed",
      "epochs",        "record_wall_clock", "scheduler",
      "scheduler.alpha0", "scheduler.delta_d", "scheduler.delta_o",
      "scheduler.delta_i", "scheduler.alpha_min", "scheduler.alpha_max",
      "scheduler.gamma",  "scheduler.decay_rate", "compare.schedulers"};
  return keys;
}

const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys{"optimizer", "optimizer.beta1", "optimizer.beta2",
                                          "optimizer.epsilon", "net.hidden", "net.activations"};
  return keys;
}

const std::set<std::string>& pinn_keys() {
  static const std::set<std::string> keys{
      "pinn.x1",          "pinn.x2",          "pinn.psi1",     "pinn.psi2",
      "pinn.frequency",   "pinn.sound_speed", "pinn.n_points", "pinn.batches",
      "pinn.batching",    "pinn.eval_points", "pinn.profile_points"};
  return keys;
}

const std::set<std::string>& mnist_keys() {
  static const std::set<std::string> keys{
      "mnist.train_images", "mnist.train_labels", "mnist.test_images", "mnist.test_labels",
      "mnist.train_limit",  "mnist.test_limit",   "mnist.batch_size",  "mnist.drop_last"};
  return keys;
}

bool known_key(const std::string& key) {
  return common_keys().count(key) || model_keys().count(key) || pinn_keys().count(key) ||
         mnist_keys().count(key) || key == "synthetic.losses";
}

bool applies_to(const std::string& key, Workload w) {
  if (common_keys().count(key)) return true;
  switch (w) {
    case Workload::kPinn: return model_keys().count(key) || pinn_keys().count(key);
    case Workload::kMnist: return model_keys().count(key) || mnist_keys().count(key);
    case Workload::kSynthetic: return key == "synthetic.losses";
  }
  return false;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    auto item = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (item.size() >= 2 && item.front() == '"' && item.back() == '"') {
      item = item.substr(1, item.size() - 2);
    }
    out.emplace_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& key, std::string_view text, int line) {
  double v = 0.0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    fail(key, line, "expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, std::string_view text, int line) {
  std::uint64_t v = 0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    fail(key, line, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, std::string_view text, int line) {
  const auto t = trim(text);
  if (t == "true") return true;
  if (t == "false") return false;
  fail(key, line, "expected true or false, got '" + std::string(text) + "'");
}

void json_value_to_text(const std::string& key, const nlohmann::json& v, std::string& out) {
  if (v.is_string()) {
    out = v.get<std::string>();
  } else if (v.is_boolean()) {
    out = v.get<bool>() ? "true" : "false";
  } else if (v.is_number_unsigned()) {
    out = std::to_string(v.get<std::uint64_t>());
  } else if (v.is_number_integer()) {
    out = std::to_string(v.get<std::int64_t>());
  } else if (v.is_number_float()) {
    out = format_double(v.get<double>());
  } else if (v.is_array()) {
    // Nested arrays are loss groups: inner elements joined by ',', groups by ';'.
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::string item;
      if (v[i].is_array()) {
        for (std::size_t j = 0; j < v[i].size(); ++j) {
          std::string inner;
          json_value_to_text(key, v[i][j], inner);
          if (j) item += ',';
          item += inner;
        }
        if (i) out += ';';
      } else {
        json_value_to_text(key, v[i], item);
        if (i) out += ',';
      }
      out += item;
    }
  } else {
    throw ConfigError(key, "unsupported JSON value");
  }
}

void flatten(const nlohmann::json& obj, const std::string& prefix, RawConfig& raw) {
  for (const auto& [k, v] : obj.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) {
      flatten(v, key, raw);
      continue;
    }
    RawConfig::Entry entry;
    json_value_to_text(key, v, entry.value);
    raw.entries[key] = std::move(entry);
  }
}

fs::path resolve_path(const fs::path& base, const std::string& text) {
  fs::path p(text);
  if (p.is_relative() && !base.empty()) p = base / p;
  return fs::absolute(p).lexically_normal();
}

}  // namespace

RawConfig parse_config_text(std::string_view text, const fs::path& base_dir) {
  RawConfig raw;
  raw.base_dir = base_dir;
  int line_no = 0;
  std::size_t start = 0;
  std::string section;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    // Strip comments outside quotes.
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) fail("[section]", line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(std::string(line), line_no, "expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) fail("(empty)", line_no, "missing key before '='");
    if (!section.empty()) key = section + "." + key;
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
      value = value.substr(1, value.size() - 2);
    }
    if (raw.entries.count(key)) {
      fail(key, line_no, "duplicate key (first set on line " +
                             std::to_string(raw.entries[key].line) + ")");
    }
    raw.entries[key] = {std::string(value), line_no};
  }
  return raw;
}

RawConfig parse_config_json(std::string_view text, const fs::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("(json)", e.what());
  }
  if (!doc.is_object()) throw ConfigError("(json)", "top level must be an object");
  RawConfig raw;
  raw.base_dir = base_dir;
  flatten(doc, "", raw);
  return raw;
}

RawConfig load_config_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto base = fs::absolute(path).parent_path();
  if (path.extension() == ".json") return parse_config_json(buf.str(), base);
  return parse_config_text(buf.str(), base);
}

ExperimentConfig resolve(const RawConfig& raw) {
  for (const auto& [key, entry] : raw.entries) {
    if (!known_key(key)) fail(key, entry.line, "unknown key");
  }

  ExperimentConfig cfg;
  const auto find = [&](const std::string& key) -> const RawConfig::Entry* {
    const auto it = raw.entries.find(key);
    return it == raw.entries.end() ? nullptr : &it->second;
  };

  const auto* wl = find("workload");
  if (!wl) throw ConfigError("workload", "required (pinn, mnist or synthetic)");
  if (wl->value == "pinn") {
    cfg.workload = Workload::kPinn;
  } else if (wl->value == "mnist") {
    cfg.workload = Workload::kMnist;
  } else if (wl->value == "synthetic") {
    cfg.workload = Workload::kSynthetic;
  } else {
    fail("workload", wl->line, "expected pinn, mnist or synthetic, got '" + wl->value + "'");
  }
  for (const auto& [key, entry] : raw.entries) {
    if (!applies_to(key, cfg.workload)) {
      fail(key, entry.line, "not used by workload " + std::string(to_string(cfg.workload)));
    }
  }

  // Workload defaults.
  switch (cfg.workload) {
    case Workload::kPinn: {
      cfg.epochs = 2000;
      cfg.alpha0 = 1e-3;
      cfg.hidden = {32, 32, 32};
      cfg.activations = nn::periodic_mlp(cfg.hidden).activations;
      break;
    }
    case Workload::kMnist: {
      cfg.epochs = 10;
      cfg.alpha0 = 0.01;
      cfg.hidden = {128};
      cfg.activations = {nn::Activation::kTanh, nn::Activation::kLogSoftmax};
      cfg.train_images = fs::absolute("data/mnist/train-images-idx3-ubyte.gz");
      cfg.train_labels = fs::absolute("data/mnist/train-labels-idx1-ubyte.gz");
      cfg.test_images = fs::absolute("data/mnist/t10k-images-idx3-ubyte.gz");
      cfg.test_labels = fs::absolute("data/mnist/t10k-labels-idx1-ubyte.gz");
      break;
    }
    case Workload::kSynthetic: {
      cfg.alpha0 = 1e-3;
      cfg.optimizer = "none";
      break;
    }
  }

  const auto str = [&](const char* key, std::string& out) {
    if (const auto* e = find(key)) out = e->value;
  };
  const auto num = [&](const char* key, double& out) {
    if (const auto* e = find(key)) out = parse_double(key, e->value, e->line);
  };
  const auto uint = [&](const char* key, auto& out) {
    if (const auto* e = find(key)) {
      out = static_cast<std::remove_reference_t<decltype(out)>>(parse_uint(key, e->value, e->line));
    }
  };
  const auto flag = [&](const char* key, bool& out) {
    if (const auto* e = find(key)) out = parse_bool(key, e->value, e->line);
  };
  const auto path = [&](const char* key, fs::path& out) {
    if (const auto* e = find(key)) out = resolve_path(raw.base_dir, e->value);
  };

  str("name", cfg.name);
  if (cfg.name.empty() || cfg.name.find_first_of("/\\") != std::string::npos ||
      cfg.name == "." || cfg.name == "..") {
    const auto* e = find("name");
    fail("name", e ? e->line : 0, "must be a plain directory name");
  }
  uint("seed", cfg.seed);
  uint("epochs", cfg.epochs);
  flag("record_wall_clock", cfg.record_wall_clock);

  str("scheduler", cfg.scheduler);
  num("scheduler.alpha0", cfg.alpha0);
  num("scheduler.delta_d", cfg.delta_d);
  num("scheduler.delta_o", cfg.delta_o);
  num("scheduler.delta_i", cfg.delta_i);
  num("scheduler.alpha_min", cfg.alpha_min);
  num("scheduler.alpha_max", cfg.alpha_max);
  num("scheduler.gamma", cfg.gamma);
  num("scheduler.decay_rate", cfg.decay_rate);

  if (const auto* e = find("compare.schedulers")) {
    cfg.compare_schedulers = split(e->value, ',');
  }

  if (cfg.workload != Workload::kSynthetic) {
    str("optimizer", cfg.optimizer);
    num("optimizer.beta1", cfg.adam.beta1);
    num("optimizer.beta2", cfg.adam.beta2);
    num("optimizer.epsilon", cfg.adam.epsilon);
    if (const auto* e = find("net.hidden")) {
      cfg.hidden.clear();
      for (const auto& item : split(e->value, ',')) {
        const auto width = parse_uint("net.hidden", item, e->line);
        if (width == 0) fail("net.hidden", e->line, "layer widths must be positive");
        cfg.hidden.push_back(width);
      }
      if (!find("net.activations")) {
        cfg.activations = cfg.workload == Workload::kPinn
                              ? nn::periodic_mlp(cfg.hidden).activations
                              : std::vector<nn::Activation>(cfg.hidden.size(), nn::Activation::kTanh);
        if (cfg.workload == Workload::kMnist) cfg.activations.push_back(nn::Activation::kLogSoftmax);
      }
    }
    if (const auto* e = find("net.activations")) {
      cfg.activations.clear();
      for (const auto& item : split(e->value, ',')) {
        try {
          cfg.activations.push_back(nn::parse_activation(item));
        } catch (const std::exception& ex) {
          fail("net.activations", e->line, ex.what());
        }
      }
    }
  }

  if (cfg.workload == Workload::kPinn) {
    num("pinn.x1", cfg.problem.x1);
    num("pinn.x2", cfg.problem.x2);
    num("pinn.psi1", cfg.problem.psi1);
    num("pinn.psi2", cfg.problem.psi2);
    num("pinn.frequency", cfg.problem.frequency);
    num("pinn.sound_speed", cfg.problem.sound_speed);
    uint("pinn.n_points", cfg.problem.n_points);
    uint("pinn.batches", cfg.pinn_batches);
    if (const auto* e = find("pinn.batching")) {
      if (e->value != "stratified" && e->value != "random") {
        fail("pinn.batching", e->line, "expected stratified or random, got '" + e->value + "'");
      }
      cfg.pinn_batching = pinn::parse_batching(e->value);
    }
    uint("pinn.eval_points", cfg.eval_points);
    uint("pinn.profile_points", cfg.profile_points);
  }
  if (cfg.workload == Workload::kMnist) {
    path("mnist.train_images", cfg.train_images);
    path("mnist.train_labels", cfg.train_labels);
    path("mnist.test_images", cfg.test_images);
    path("mnist.test_labels", cfg.test_labels);
    uint("mnist.train_limit", cfg.train_limit);
    uint("mnist.test_limit", cfg.test_limit);
    uint("mnist.batch_size", cfg.batch_size);
    flag("mnist.drop_last", cfg.drop_last);
  }
  if (cfg.workload == Workload::kSynthetic) {
    const auto* e = find("synthetic.losses");
    if (!e) throw ConfigError("synthetic.losses", "required for the synthetic workload");
    for (const auto& group : split(e->value, ';')) {
      std::vector<double> losses;
      for (const auto& item : split(group, ',')) {
        losses.push_back(parse_double("synthetic.losses", item, e->line));
      }
      cfg.synthetic_losses.push_back(std::move(losses));
    }
    const auto groups = cfg.synthetic_losses.size();
    if (const auto* ep = find("epochs")) {
      if (cfg.epochs != groups) {
        fail("epochs", ep->line,
             "synthetic workload has " + std::to_string(groups) + " loss groups");
      }
    }
    cfg.epochs = groups;
  }

  // Validation; each check names the key it came from.
  const auto line_of = [&](const char* key) {
    const auto* e = find(key);
    return e ? e->line : 0;
  };
  if (cfg.epochs == 0) fail("epochs", line_of("epochs"), "must be positive");
  try {
    validate(cfg.scheduler_config());
  } catch (const ConfigError& ex) {
    std::string key = ex.field();
    if (key.rfind("scheduler", 0) != 0) key = "scheduler." + key;
    fail(key, line_of(key.c_str()), ex.what());
  }
  {
    std::set<std::string> seen;
    for (const auto& s : cfg.compare_schedulers) {
      if (!seen.insert(s).second) {
        fail("compare.schedulers", line_of("compare.schedulers"), "duplicate scheduler '" + s + "'");
      }
      try {
        validate(cfg.scheduler_config(s));
      } catch (const ConfigError& ex) {
        fail("compare.schedulers", line_of("compare.schedulers"), ex.what());
      }
    }
  }

  if (cfg.workload != Workload::kSynthetic) {
    if (cfg.optimizer != "adam" && cfg.optimizer != "sgd") {
      fail("optimizer", line_of("optimizer"), "expected adam or sgd, got '" + cfg.optimizer + "'");
    }
    try {
      cfg.adam.validate();
    } catch (const ConfigError& ex) {
      const std::string key = "optimizer." + ex.field();
      fail(key, line_of(key.c_str()), ex.what());
    }
    if (cfg.activations.size() != cfg.hidden.size() + 1) {
      fail("net.activations", line_of("net.activations"),
           "need one activation per hidden layer plus the output layer (" +
               std::to_string(cfg.hidden.size() + 1) + ")");
    }
    try {
      cfg.net_spec().validate();
    } catch (const std::exception& ex) {
      fail("net.activations", line_of("net.activations"), ex.what());
    }
  }
  if (cfg.workload == Workload::kPinn) {
    try {
      cfg.problem.validate();
    } catch (const ConfigError& ex) {
      fail(ex.field(), line_of(ex.field().c_str()), ex.what());
    }
    if (cfg.pinn_batches == 0 || cfg.pinn_batches > cfg.problem.n_points) {
      fail("pinn.batches", line_of("pinn.batches"), "must be between 1 and pinn.n_points");
    }
    if (cfg.eval_points < 2) fail("pinn.eval_points", line_of("pinn.eval_points"), "must be at least 2");
    if (cfg.profile_points < 2) {
      fail("pinn.profile_points", line_of("pinn.profile_points"), "must be at least 2");
    }
  }
  if (cfg.workload == Workload::kMnist) {
    if (cfg.batch_size == 0) fail("mnist.batch_size", line_of("mnist.batch_size"), "must be positive");
    if (cfg.hidden.empty()) fail("net.hidden", line_of("net.hidden"), "need at least one hidden layer");
  }
  if (cfg.workload == Workload::kSynthetic) {
    for (const auto& group : cfg.synthetic_losses) {
      for (double l : group) {
        if (!std::isfinite(l) || l < 0.0) {
          fail("synthetic.losses", line_of("synthetic.losses"), "losses must be finite and >= 0");
        }
      }
    }
  }
  return cfg;
}

SchedulerConfig ExperimentConfig::scheduler_config(const std::string& name) const {
  if (name == "dlrs") return DlrsConfig{alpha0, delta_d, delta_o, delta_i, alpha_min, alpha_max};
  if (name == "adacomp") return AdacompConfig{alpha0, gamma, alpha_min, alpha_max};
  if (name == "constant") return ConstantConfig{alpha0};
  if (name == "decay") return DecayConfig{alpha0, decay_rate};
  throw ConfigError("scheduler", "expected dlrs, adacomp, constant or decay, got '" + name + "'");
}

optim::OptimizerConfig ExperimentConfig::optimizer_config() const {
  if (optimizer == "sgd") return optim::SgdConfig{};
  return adam;
}

nn::NetSpec ExperimentConfig::net_spec() const {
  nn::NetSpec spec;
  spec.sizes.push_back(workload == Workload::kMnist ? 784 : 1);
  for (auto h : hidden) spec.sizes.push_back(h);
  spec.sizes.push_back(workload == Workload::kMnist ? 10 : 1);
  spec.activations = activations;
  return spec;
}

pinn::PinnTrainConfig ExperimentConfig::pinn_config() const {
  pinn::PinnTrainConfig pc;
  pc.net = net_spec();
  pc.optimizer = optimizer_config();
  pc.scheduler = scheduler_config();
  pc.epochs = epochs;
  pc.batch_count = pinn_batches;
  pc.batching = pinn_batching;
  pc.eval_points = eval_points;
  pc.seed = seed;
  return pc;
}

mnist::ClassifierConfig ExperimentConfig::classifier_config() const {
  mnist::ClassifierConfig cc;
  cc.net = net_spec();
  cc.optimizer = optimizer_config();
  cc.scheduler = scheduler_config();
  cc.epochs = epochs;
  cc.batches = {batch_size, seed, drop_last};
  cc.seed = seed;
  return cc;
}

std::string echo_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["name"] = cfg.name;
  j["workload"] = std::string(to_string(cfg.workload));
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["record_wall_clock"] = cfg.record_wall_clock;
  j["scheduler"] = cfg.scheduler;
  j["scheduler.alpha0"] = cfg.alpha0;
  j["scheduler.delta_d"] = cfg.delta_d;
  j["scheduler.delta_o"] = cfg.delta_o;
  j["scheduler.delta_i"] = cfg.delta_i;
  j["scheduler.alpha_min"] = cfg.alpha_min;
  j["scheduler.alpha_max"] = cfg.alpha_max;
  j["scheduler.gamma"] = cfg.gamma;
  j["scheduler.decay_rate"] = cfg.decay_rate;
  if (!cfg.compare_schedulers.empty()) j["compare.schedulers"] = cfg.compare_schedulers;

  if (cfg.workload != Workload::kSynthetic) {
    j["optimizer"] = cfg.optimizer;
    j["optimizer.beta1"] = cfg.adam.beta1;
    j["optimizer.beta2"] = cfg.adam.beta2;
    j["optimizer.epsilon"] = cfg.adam.epsilon;
    j["net.hidden"] = cfg.hidden;
    auto acts = nlohmann::ordered_json::array();
    for (auto a : cfg.activations) acts.push_back(std::string(nn::to_string(a)));
    j["net.activations"] = acts;
  }
  if (cfg.workload == Workload::kPinn) {
    j["pinn.x1"] = cfg.problem.x1;
    j["pinn.x2"] = cfg.problem.x2;
    j["pinn.psi1"] = cfg.problem.psi1;
    j["pinn.psi2"] = cfg.problem.psi2;
    j["pinn.frequency"] = cfg.problem.frequency;
    j["pinn.sound_speed"] = cfg.problem.sound_speed;
    j["pinn.n_points"] = cfg.problem.n_points;
    j["pinn.batches"] = cfg.pinn_batches;
    j["pinn.batching"] = std::string(pinn::to_string(cfg.pinn_batching));
    j["pinn.eval_points"] = cfg.eval_points;
    j["pinn.profile_points"] = cfg.profile_points;
  }
  if (cfg.workload == Workload::kMnist) {
    j["mnist.train_images"] = cfg.train_images.string();
    j["mnist.train_labels"] = cfg.train_labels.string();
    j["mnist.test_images"] = cfg.test_images.string();
    j["mnist.test_labels"] = cfg.test_labels.string();
    j["mnist.train_limit"] = cfg.train_limit;
    j["mnist.test_limit"] = cfg.test_limit;
    j["mnist.batch_size"] = cfg.batch_size;
    j["mnist.drop_last"] = cfg.drop_last;
  }
  if (cfg.workload == Workload::kSynthetic) j["synthetic.losses"] = cfg.synthetic_losses;
  return j.dump(2) + "\n";
}

}  // namespace dlrs::harness
