#include "blink/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace blink {

namespace {

enum class Ty { Int, U64, Double, Bool, Str, IntList, Enum };

struct SchemaRow {
  const char* key;
  Ty type;
  const char* def;
  const char* allowed;  // for Enum: comma-separated values
};

// Every known key with its type and default. Model defaults match the desk
// preset; finalize() swaps in paper-preset values for untouched keys when
// model.preset=paper.
const SchemaRow kSchema[] = {
    {"data.canvas", Ty::Int, "64", nullptr},
    {"data.fps", Ty::Double, "10", nullptr},
    {"data.length", Ty::Int, "20", nullptr},
    {"data.train_count", Ty::Int, "600", nullptr},
    {"data.val_count", Ty::Int, "100", nullptr},
    {"data.test_count", Ty::Int, "200", nullptr},
    {"data.mix.left", Ty::Double, "0.20", nullptr},
    {"data.mix.right", Ty::Double, "0.20", nullptr},
    {"data.mix.flashers", Ty::Double, "0.10", nullptr},
    {"data.mix.off", Ty::Double, "0.35", nullptr},
    {"data.mix.unknown", Ty::Double, "0.15", nullptr},
    {"data.mix.balanced", Ty::Bool, "false", nullptr},
    {"data.occlusion_rate", Ty::Double, "0.25", nullptr},
    {"data.noise", Ty::Int, "8", nullptr},
    {"data.seed", Ty::U64, "1", nullptr},
    {"data.dir", Ty::Str, "data", nullptr},

    {"model.preset", Ty::Enum, "desk", "desk,paper"},
    {"model.input_size", Ty::Int, "64", nullptr},
    {"model.normalize", Ty::Enum, "unit", "unit"},
    {"model.attention.enabled", Ty::Bool, "true", nullptr},
    {"model.attention.channels", Ty::IntList, "4,6,6,1", nullptr},
    {"model.attention.dilations", Ty::IntList, "1,2,2,1", nullptr},
    {"model.backbone.blocks", Ty::Str, "16;24;32;64", nullptr},
    {"model.lstm.layers", Ty::Int, "2", nullptr},
    {"model.lstm.channels", Ty::Int, "32", nullptr},
    {"model.lstm.kernel", Ty::Int, "3", nullptr},
    {"model.lstm.conv_peephole", Ty::Bool, "false", nullptr},
    {"model.trunk", Ty::Int, "128", nullptr},

    {"train.lr", Ty::Double, "0.0001", nullptr},
    {"train.beta1", Ty::Double, "0.9", nullptr},
    {"train.beta2", Ty::Double, "0.999", nullptr},
    {"train.eps", Ty::Double, "1e-8", nullptr},
    {"train.weight_decay", Ty::Double, "0.0001", nullptr},
    {"train.dropout", Ty::Double, "0.5", nullptr},
    {"train.max_epochs", Ty::Int, "50", nullptr},
    {"train.window", Ty::Int, "20", nullptr},
    {"train.batch", Ty::Int, "8", nullptr},
    {"train.windows_per_epoch", Ty::Int, "96", nullptr},
    {"train.plateau.factor", Ty::Double, "0.1", nullptr},
    {"train.plateau.patience", Ty::Int, "5", nullptr},
    {"train.plateau.threshold", Ty::Double, "0.001", nullptr},
    {"train.gamma.intent", Ty::Double, "1.0", nullptr},
    {"train.gamma.left", Ty::Double, "1.0", nullptr},
    {"train.gamma.right", Ty::Double, "1.0", nullptr},
    {"train.gamma.view", Ty::Double, "1.0", nullptr},
    {"train.loss_mode", Ty::Enum, "full", "full,intent_only,intent_view"},
    {"train.seed", Ty::U64, "42", nullptr},
    {"train.augment.mirror", Ty::Bool, "true", nullptr},
    {"train.augment.jitter", Ty::Bool, "true", nullptr},
    {"train.augment.brightness", Ty::Double, "0.1", nullptr},
    {"train.augment.contrast", Ty::Double, "0.1", nullptr},
    {"train.early_stop_accuracy", Ty::Double, "0", nullptr},

    {"eval.batch", Ty::Int, "8", nullptr},
    {"eval.split", Ty::Enum, "test", "train,val,test"},
    {"eval.checkpoint", Ty::Str, "runs/train/model.ckpt", nullptr},

    {"infer.split", Ty::Enum, "test", "train,val,test"},
    {"infer.checkpoint", Ty::Str, "runs/train/model.ckpt", nullptr},

    {"infer.sequence", Ty::Int, "0", nullptr},
    {"infer.count", Ty::Int, "1", nullptr},
    {"infer.dump_masks", Ty::Bool, "false", nullptr},

    {"gradcheck.seeds", Ty::Int, "20", nullptr},
    {"gradcheck.e2e", Ty::Bool, "true", nullptr},

    {"ablate.seeds", Ty::IntList, "1,2,3", nullptr},
    {"ablate.epochs", Ty::Int, "6", nullptr},
    {"ablate.windows_per_epoch", Ty::Int, "48", nullptr},
    {"ablate.window", Ty::Int, "10", nullptr},
    {"ablate.batch", Ty::Int, "8", nullptr},
};

// Keys rewritten by model.preset for untouched entries.
struct PresetRow {
  const char* key;
  const char* desk;
  const char* paper;
};
const PresetRow kPresets[] = {
    {"model.input_size", "64", "224"},
    {"model.attention.channels", "4,6,6,1", "32,64,64,1"},
    {"model.backbone.blocks", "16;24;32;64",
     "64,64;128,128;256,256,256;512,512,512;512,512,512"},
    {"model.lstm.channels", "32", "256"},
    {"model.trunk", "128", "1024"},
};

const SchemaRow* find_row(const std::string& key) {
  for (const auto& row : kSchema)
    if (key == row.key) return &row;
  return nullptr;
}

bool parse_i64(const std::string& s, int64_t& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtoll(s.c_str(), &end, 10);
  return errno == 0 && end && *end == '\0';
}

bool parse_f64(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end && *end == '\0';
}

void validate_value(const SchemaRow& row, const std::string& value) {
  auto bad = [&](const char* what) {
    throw ConfigError(std::string(row.key) + ": expected " + what + ", got '" +
                      value + "'");
  };
  switch (row.type) {
    case Ty::Int: {
      int64_t v;
      if (!parse_i64(value, v)) bad("an integer");
      break;
    }
    case Ty::U64: {
      if (value.empty() || value[0] == '-') bad("an unsigned integer");
      char* end = nullptr;
      errno = 0;
      (void)std::strtoull(value.c_str(), &end, 10);
      if (errno != 0 || !end || *end != '\0') bad("an unsigned integer");
      break;
    }
    case Ty::Double: {
      double v;
      if (!parse_f64(value, v)) bad("a number");
      break;
    }
    case Ty::Bool:
      if (value != "true" && value != "false" && value != "0" && value != "1")
        bad("true/false");
      break;
    case Ty::Str:
      break;
    case Ty::IntList: {
      std::stringstream ss(value);
      std::string item;
      bool any = false;
      while (std::getline(ss, item, ',')) {
        int64_t v;
        if (!parse_i64(item, v)) bad("a comma-separated integer list");
        any = true;
      }
      if (!any) bad("a comma-separated integer list");
      break;
    }
    case Ty::Enum: {
      std::stringstream ss(row.allowed);
      std::string item;
      while (std::getline(ss, item, ','))
        if (value == item) return;
      throw ConfigError(std::string(row.key) + ": '" + value + "' not in {" +
                        row.allowed + "}");
    }
  }
}

}  // namespace

Config Config::defaults() {
  Config c;
  for (const auto& row : kSchema) c.entries_[row.key] = {row.def, false};
  return c;
}

const Config::Entry& Config::lookup(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

bool Config::explicitly_set(const std::string& key) const {
  return lookup(key).explicit_set;
}

void Config::set(const std::string& key, const std::string& value) {
  const SchemaRow* row = find_row(key);
  if (!row) throw ConfigError("unknown config key: " + key);
  validate_value(*row, value);
  entries_[key] = {value, true};
  finalized_ = false;
}

void Config::apply_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must be key=value, got '" + kv + "'");
  set(kv.substr(0, eq), kv.substr(eq + 1));
}

void Config::apply_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  apply_text(ss.str(), path);
}

void Config::apply_text(const std::string& text, const std::string& what) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> stack;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    auto fail = [&](const std::string& msg) {
      throw ConfigError(what + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (line == "}") {
      if (stack.empty()) fail("unmatched '}'");
      stack.pop_back();
      continue;
    }
    if (line.size() >= 2 && line.back() == '{') {
      std::string name = line.substr(0, line.size() - 1);
      const auto ne = name.find_last_not_of(" \t");
      if (ne == std::string::npos) fail("section needs a name");
      name = name.substr(0, ne + 1);
      if (name.find_first_of(" \t") != std::string::npos)
        fail("section name cannot contain spaces");
      stack.push_back(name);
      continue;
    }
    const auto sp = line.find_first_of(" \t");
    if (sp == std::string::npos) fail("expected 'key value'");
    std::string key = line.substr(0, sp);
    std::string value = line.substr(line.find_first_not_of(" \t", sp));
    std::string full;
    for (const auto& s : stack) full += s + ".";
    full += key;
    try {
      set(full, value);
    } catch (const ConfigError& err) {
      fail(err.what());
    }
  }
  if (!stack.empty())
    throw ConfigError(what + ": unclosed section '" + stack.back() + "'");
}

void Config::finalize() {
  if (finalized_) return;
  const std::string preset = entries_.at("model.preset").value;
  for (const auto& row : kPresets) {
    auto& e = entries_.at(row.key);
    if (!e.explicit_set) e.value = preset == "paper" ? row.paper : row.desk;
  }
  if (get_int("data.canvas") < 24)
    throw ConfigError("data.canvas: must be >= 24");
  if (get_double("data.fps") <= 0) throw ConfigError("data.fps: must be > 0");
  if (get_int("data.length") < 1)
    throw ConfigError("data.length: must be >= 1");
  finalized_ = true;
}

int Config::get_int(const std::string& key) const {
  int64_t v = 0;
  parse_i64(lookup(key).value, v);
  return static_cast<int>(v);
}

uint64_t Config::get_u64(const std::string& key) const {
  return std::strtoull(lookup(key).value.c_str(), nullptr, 10);
}

double Config::get_double(const std::string& key) const {
  double v = 0;
  parse_f64(lookup(key).value, v);
  return v;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = lookup(key).value;
  return v == "true" || v == "1";
}

const std::string& Config::get_string(const std::string& key) const {
  return lookup(key).value;
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(lookup(key).value);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(static_cast<int>(std::strtoll(item.c_str(), nullptr, 10)));
  return out;
}

std::string Config::canonical_text() const {
  // entries_ is sorted by key; emit nested sections on prefix changes.
  std::ostringstream os;
  std::vector<std::string> open;
  for (const auto& [key, entry] : entries_) {
    std::vector<std::string> parts;
    std::stringstream ss(key);
    std::string p;
    while (std::getline(ss, p, '.')) parts.push_back(p);
    const size_t depth = parts.size() - 1;
    size_t common = 0;
    while (common < open.size() && common < depth && open[common] == parts[common])
      ++common;
    while (open.size() > common) {
      open.pop_back();
      os << std::string(open.size() * 2, ' ') << "}\n";
    }
    while (open.size() < depth) {
      os << std::string(open.size() * 2, ' ') << parts[open.size()] << " {\n";
      open.push_back(parts[open.size()]);
    }
    os << std::string(depth * 2, ' ') << parts.back() << " " << entry.value << "\n";
  }
  while (!open.empty()) {
    open.pop_back();
    os << std::string(open.size() * 2, ' ') << "}\n";
  }
  return os.str();
}

}  // namespace blink
