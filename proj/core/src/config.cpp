#include "g2g/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "g2g/errors.hpp"

namespace g2g {

std::vector<PhasePlan> RunConfig::phase_plan() const {
  PhasePlan p1;
  p1.index = 1;
  p1.epochs = phase1_epochs;
  p1.lr = phase1_lr;
  p1.update_stage1 = true;
  PhasePlan p2;
  p2.index = 2;
  p2.epochs = phase2_epochs;
  p2.lr = phase2_lr;
  p2.update_stage1 = false;
  return {p1, p2};
}

std::vector<PhasePlan> RunConfig::baseline_plan() const {
  PhasePlan p;
  p.index = 1;
  p.epochs = baseline_epochs;
  p.lr = baseline_lr;
  return {p};
}

SplitCounts RunConfig::split_counts() const {
  SplitCounts c;
  c.train = train_count;
  c.val = val_count;
  c.test = test_count;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& key, const std::string& hint) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError(hint + ": key '" + key + "' wants an integer, got '" + v + "'");
  return out;
}

uint64_t to_u64(const std::string& v, const std::string& key, const std::string& hint) {
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ConfigError(hint + ": key '" + key + "' wants an unsigned integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v, const std::string& key, const std::string& hint) {
  try {
    size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(hint + ": key '" + key + "' wants a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key, const std::string& hint) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(hint + ": key '" + key + "' wants true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& hint) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(hint + ":" + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));

    if (key == "data_root") cfg.data_root = val;
    else if (key == "output_root") cfg.output_root = val;
    else if (key == "checkpoint") cfg.checkpoint = val;
    else if (key == "model") {
      if (val != "g2g" && val != "pix2pix")
        throw ConfigError(hint + ": model must be g2g or pix2pix, got '" + val + "'");
      cfg.model = val;
    }
    else if (key == "seed") cfg.seed = to_u64(val, key, hint);
    else if (key == "source_side") cfg.grid.source_side = to_int(val, key, hint);
    else if (key == "trimmed_side") cfg.grid.trimmed_side = to_int(val, key, hint);
    else if (key == "tile_side") cfg.grid.tile_side = to_int(val, key, hint);
    else if (key == "output_side") cfg.grid.output_side = to_int(val, key, hint);
    else if (key == "grid_n") cfg.grid.grid_n = to_int(val, key, hint);
    else if (key == "train_count") cfg.train_count = to_int(val, key, hint);
    else if (key == "val_count") cfg.val_count = to_int(val, key, hint);
    else if (key == "test_count") cfg.test_count = to_int(val, key, hint);
    else if (key == "contour_width") cfg.contour_width = to_int(val, key, hint);
    else if (key == "lambda_l1") cfg.objective.lambda_l1 = to_double(val, key, hint);
    else if (key == "beta1") cfg.objective.beta1 = to_double(val, key, hint);
    else if (key == "beta2") cfg.objective.beta2 = to_double(val, key, hint);
    else if (key == "detach_stage1") cfg.objective.detach_stage1 = to_bool(val, key, hint);
    else if (key == "phase1_epochs") cfg.phase1_epochs = to_int(val, key, hint);
    else if (key == "phase1_lr") cfg.phase1_lr = to_double(val, key, hint);
    else if (key == "phase2_epochs") cfg.phase2_epochs = to_int(val, key, hint);
    else if (key == "phase2_lr") cfg.phase2_lr = to_double(val, key, hint);
    else if (key == "baseline_epochs") cfg.baseline_epochs = to_int(val, key, hint);
    else if (key == "baseline_lr") cfg.baseline_lr = to_double(val, key, hint);
    else if (key == "checkpoint_every") cfg.checkpoint_every = to_int(val, key, hint);
    else if (key == "log_every") cfg.log_every = to_int(val, key, hint);
    else
      throw ConfigError(hint + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# paths\n";
  out << "data_root=" << cfg.data_root << "\n";
  out << "output_root=" << cfg.output_root << "\n";
  out << "checkpoint=" << cfg.checkpoint << "\n";
  out << "model=" << cfg.model << "\n";
  out << "seed=" << cfg.seed << "\n";
  out << "# tile grid\n";
  out << "source_side=" << cfg.grid.source_side << "\n";
  out << "trimmed_side=" << cfg.grid.trimmed_side << "\n";
  out << "tile_side=" << cfg.grid.tile_side << "\n";
  out << "output_side=" << cfg.grid.output_side << "\n";
  out << "grid_n=" << cfg.grid.grid_n << "\n";
  out << "# split (whole source images)\n";
  out << "train_count=" << cfg.train_count << "\n";
  out << "val_count=" << cfg.val_count << "\n";
  out << "test_count=" << cfg.test_count << "\n";
  out << "contour_width=" << cfg.contour_width << "\n";
  out << "# objective\n";
  out << "lambda_l1=" << fmt_double(cfg.objective.lambda_l1) << "\n";
  out << "beta1=" << fmt_double(cfg.objective.beta1) << "\n";
  out << "beta2=" << fmt_double(cfg.objective.beta2) << "\n";
  out << "detach_stage1=" << (cfg.objective.detach_stage1 ? "true" : "false") << "\n";
  out << "# schedule\n";
  out << "phase1_epochs=" << cfg.phase1_epochs << "\n";
  out << "phase1_lr=" << fmt_double(cfg.phase1_lr) << "\n";
  out << "phase2_epochs=" << cfg.phase2_epochs << "\n";
  out << "phase2_lr=" << fmt_double(cfg.phase2_lr) << "\n";
  out << "baseline_epochs=" << cfg.baseline_epochs << "\n";
  out << "baseline_lr=" << fmt_double(cfg.baseline_lr) << "\n";
  out << "checkpoint_every=" << cfg.checkpoint_every << "\n";
  out << "log_every=" << cfg.log_every << "\n";
  return out.str();
}

}  // namespace g2g
