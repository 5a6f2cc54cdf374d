#include "spad/run_config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "spad/errors.hpp"

namespace spad {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"data", {"train_manifest", "contaminant_manifest", "contamination_ratio", "test_manifest", "input_side"}},
      {"model", {"widths", "norm_groups", "leaky_slope"}},
      {"train",
       {"learning_rate", "momentum", "weight_decay", "lr_gamma", "batch_size", "epochs", "warmup_epochs", "seed"}},
      {"spl", {"enabled", "m", "r", "running_statistics", "running_momentum"}},
      {"eval", {"checkpoint", "epochs", "plots"}},
      {"synth", {"bonafide", "attacks", "side", "test_fraction", "alpha_min", "alpha_max", "alpha", "smooth"}},
      {"output", {"out_dir"}},
  };
  return keys;
}

class Section {
 public:
  Section(const toml::table* table, std::string name, fs::path base)
      : table_(table), name_(std::move(name)), base_(std::move(base)) {}

  void real(const char* key, double& out) const {
    if (auto n = node(key)) {
      if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) {
        out = *v;
        return;
      }
      fail(key, "expected a number");
    }
  }

  template <typename Int>
  void integer(const char* key, Int& out) const {
    if (auto n = node(key)) {
      if (!n->is_integer()) fail(key, "expected an integer");
      const auto v = *n->value<std::int64_t>();
      if constexpr (std::is_unsigned_v<Int>) {
        if (v < 0) fail(key, "must be >= 0");
      }
      out = static_cast<Int>(v);
    }
  }

  void boolean(const char* key, bool& out) const {
    if (auto n = node(key)) {
      if (!n->is_boolean()) fail(key, "expected true or false");
      out = *n->value<bool>();
    }
  }

  void string(const char* key, std::string& out) const {
    if (auto n = node(key)) {
      if (!n->is_string()) fail(key, "expected a string");
      out = *n->value<std::string>();
    }
  }

  void path(const char* key, std::optional<fs::path>& out) const {
    std::string text;
    if (!node(key)) return;
    string(key, text);
    if (text.empty()) fail(key, "path must not be empty");
    fs::path p(text);
    out = (p.is_absolute() || base_.empty() ? p : base_ / p).lexically_normal();
  }

  void int_list(const char* key, std::vector<int>& out) const {
    if (auto n = node(key)) {
      const auto* arr = n->as_array();
      if (!arr) fail(key, "expected an array of integers");
      out.clear();
      for (const auto& item : *arr) {
        if (!item.is_integer()) fail(key, "expected an array of integers");
        out.push_back(static_cast<int>(*item.value<std::int64_t>()));
      }
    }
  }

  const toml::node* node(const char* key) const { return table_ ? table_->get(key) : nullptr; }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError(name_ + "." + key + ": " + what);
  }

 private:
  const toml::table* table_;
  std::string name_;
  fs::path base_;
};

double parse_ratio(const Section& s) {
  const toml::node* n = s.node("contamination_ratio");
  if (!n) return kNoContamination;
  if (n->is_string()) {
    const auto text = *n->value<std::string>();
    if (text == "off" || text == "inf") return kNoContamination;
    s.fail("contamination_ratio", "expected a positive number or \"off\", got \"" + text + "\"");
  }
  double ratio = 0.0;
  s.real("contamination_ratio", ratio);
  return ratio;
}

void check_file(const std::optional<fs::path>& p, const char* key) {
  if (!p) throw ConfigError(std::string(key) + ": required but not set");
  std::error_code ec;
  if (!fs::is_regular_file(*p, ec)) throw ConfigError(std::string(key) + ": no such file " + p->string());
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const fs::path& base_dir, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ConfigError(msg.str());
  }

  for (const auto& [key, value] : root) {
    const std::string name(key.str());
    const auto it = known_keys().find(name);
    if (it == known_keys().end()) throw ConfigError(source + ": unknown section or key '" + name + "'");
    const auto* table = value.as_table();
    if (!table) throw ConfigError(source + ": '" + name + "' must be a [section]");
    for (const auto& [inner, unused] : *table) {
      (void)unused;
      if (!it->second.count(std::string(inner.str())))
        throw ConfigError(source + ": unknown key '" + name + "." + std::string(inner.str()) + "'");
    }
  }

  auto section = [&](const char* name) { return Section(root[name].as_table(), name, base_dir); };
  RunConfig c;

  const Section data = section("data");
  data.path("train_manifest", c.train_manifest);
  data.path("contaminant_manifest", c.contaminant_manifest);
  data.path("test_manifest", c.test_manifest);
  c.contamination_ratio = parse_ratio(data);
  data.integer("input_side", c.input_side);

  const Section model = section("model");
  model.int_list("widths", c.widths);
  model.integer("norm_groups", c.norm_groups);
  model.real("leaky_slope", c.leaky_slope);

  const Section train = section("train");
  train.real("learning_rate", c.train.learning_rate);
  train.real("momentum", c.train.momentum);
  train.real("weight_decay", c.train.weight_decay);
  train.real("lr_gamma", c.train.lr_gamma);
  train.integer("batch_size", c.train.batch_size);
  train.integer("epochs", c.train.epochs);
  train.integer("warmup_epochs", c.train.warmup_epochs);
  train.integer("seed", c.train.seed);

  const Section spl = section("spl");
  spl.boolean("enabled", c.train.spl_enabled);
  spl.real("m", c.train.m);
  spl.real("r", c.train.r);
  spl.boolean("running_statistics", c.train.running_statistics);
  spl.real("running_momentum", c.train.running_momentum);

  const Section eval = section("eval");
  eval.path("checkpoint", c.eval_checkpoint);
  eval.string("epochs", c.eval_epochs);
  eval.boolean("plots", c.eval_plots);

  const Section synth = section("synth");
  synth.integer("bonafide", c.synth.n_bonafide);
  synth.integer("attacks", c.synth.n_attacks);
  synth.integer("side", c.synth.side);
  synth.real("test_fraction", c.synth.test_fraction);
  synth.real("alpha_min", c.synth.alpha_min);
  synth.real("alpha_max", c.synth.alpha_max);
  if (synth.node("alpha")) {
    double a = 0.0;
    synth.real("alpha", a);
    c.synth.alpha_override = a;
  }
  synth.boolean("smooth", c.synth.smooth_attacks);

  const Section output = section("output");
  std::optional<fs::path> out;
  output.path("out_dir", out);
  if (out) c.out_dir = *out;

  c.validate_common();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  return parse(text.str(), fs::absolute(path).parent_path(), path.string());
}

std::string RunConfig::to_toml() const {
  auto abs = [](const fs::path& p) { return fs::absolute(p).lexically_normal().string(); };
  toml::table data{{"input_side", input_side}};
  if (train_manifest) data.insert("train_manifest", abs(*train_manifest));
  if (contaminant_manifest) data.insert("contaminant_manifest", abs(*contaminant_manifest));
  if (test_manifest) data.insert("test_manifest", abs(*test_manifest));
  if (std::isinf(contamination_ratio))
    data.insert("contamination_ratio", "off");
  else
    data.insert("contamination_ratio", contamination_ratio);

  toml::array width_list;
  for (int w : widths) width_list.push_back(w);

  toml::table eval{{"epochs", eval_epochs}, {"plots", eval_plots}};
  if (eval_checkpoint) eval.insert("checkpoint", abs(*eval_checkpoint));

  toml::table synth_table{{"bonafide", synth.n_bonafide},       {"attacks", synth.n_attacks},
                          {"side", synth.side},                 {"test_fraction", synth.test_fraction},
                          {"alpha_min", synth.alpha_min},       {"alpha_max", synth.alpha_max},
                          {"smooth", synth.smooth_attacks}};
  if (synth.alpha_override) synth_table.insert("alpha", *synth.alpha_override);

  toml::table root{
      {"data", data},
      {"model", toml::table{{"widths", width_list}, {"norm_groups", norm_groups}, {"leaky_slope", leaky_slope}}},
      {"train", toml::table{{"learning_rate", train.learning_rate},
                            {"momentum", train.momentum},
                            {"weight_decay", train.weight_decay},
                            {"lr_gamma", train.lr_gamma},
                            {"batch_size", train.batch_size},
                            {"epochs", train.epochs},
                            {"warmup_epochs", train.warmup_epochs},
                            {"seed", static_cast<std::int64_t>(train.seed)}}},
      {"spl", toml::table{{"enabled", train.spl_enabled},
                          {"m", train.m},
                          {"r", train.r},
                          {"running_statistics", train.running_statistics},
                          {"running_momentum", train.running_momentum}}},
      {"eval", eval},
      {"synth", synth_table},
      {"output", toml::table{{"out_dir", abs(out_dir)}}},
  };
  std::ostringstream out;
  out << root << '\n';
  return out.str();
}

ArchitectureDescriptor RunConfig::architecture() const {
  try {
    ArchitectureDescriptor d = widths.empty() ? ArchitectureDescriptor::standard(input_side, 3)
                                              : ArchitectureDescriptor::with_widths(input_side, 3, widths);
    d.norm_groups = norm_groups;
    d.leaky_slope = leaky_slope;
    d.validate();
    return d;
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

void RunConfig::validate_common() const {
  if (!(contamination_ratio > 0.0)) throw ConfigError("data.contamination_ratio: must be positive or \"off\"");
  if (input_side <= 0) throw ConfigError("data.input_side: must be positive");
  if (norm_groups <= 0) throw ConfigError("model.norm_groups: must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("model.leaky_slope: must be in [0,1)");
  if (eval_epochs != "last" && eval_epochs != "all")
    throw ConfigError("eval.epochs: expected \"last\" or \"all\", got \"" + eval_epochs + "\"");
  train.validate();
  architecture();
}

void RunConfig::validate_for_train() const {
  validate_common();
  check_file(train_manifest, "data.train_manifest");
  if (!std::isinf(contamination_ratio)) check_file(contaminant_manifest, "data.contaminant_manifest");
}

void RunConfig::validate_for_eval() const {
  validate_common();
  check_file(test_manifest, "data.test_manifest");
}

}  // namespace spad
