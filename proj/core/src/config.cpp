#include "openrpf/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "openrpf/errors.hpp"

namespace openrpf {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_plain(std::string_view t) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw ValidationError("'" + std::string(t) + "' is not a number");
  }
  return v;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario", {"name"}},
      {"base", {"kind", "size", "permutation", "weights", "half_width", "window", "symbols", "seed", "probs"}},
      {"hole", {}},
      {"potential", {"kind", "values", "expr"}},
      {"discretization", {"cells", "depth"}},
      {"solver", {"tolerance", "max_iterations"}},
      {"analysis",
       {"functional_depth", "samples", "seed", "fiber", "escape_n_max", "geometric_depth", "correlation_n_max",
        "invariance_depth", "invariance_sets", "contraction_iterates", "contraction_pairs", "observable_f",
        "observable_g", "tolerance"}},
      {"cones", {"a", "u", "v", "epsilon", "depth", "samples", "max_level", "coating_cap", "seed"}},
      {"outputs", {"dir", "format", "export_matrices"}},
      {"check", {"cones", "escape_tolerance", "start_tolerance"}},
  };
  return keys;
}

class Reader {
 public:
  explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

  const ConfigEntry* find(const std::string& section, const std::string& key) const { return doc_.find(section, key); }

  double number(const ConfigEntry& e, const std::string& field) const {
    try {
      return parse_number(e.value);
    } catch (const ValidationError& err) {
      doc_.fail(e.line, field, err.what());
    }
  }
  std::vector<double> numbers(const ConfigEntry& e, const std::string& field) const {
    std::vector<double> out;
    for (const auto& t : split_ws(e.value)) {
      try {
        out.push_back(parse_number(t));
      } catch (const ValidationError& err) {
        doc_.fail(e.line, field, err.what());
      }
    }
    return out;
  }
  long long integer(const ConfigEntry& e, const std::string& field, long long lo, long long hi) const {
    const double v = number(e, field);
    if (v != std::floor(v) || v < static_cast<double>(lo) || v > static_cast<double>(hi)) {
      doc_.fail(e.line, field, "expected an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<long long>(v);
  }
  std::uint64_t u64(const ConfigEntry& e, const std::string& field) const {
    std::uint64_t v = 0;
    const std::string s = trim(e.value);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) doc_.fail(e.line, field, "expected an unsigned 64-bit integer");
    return v;
  }
  double positive(const ConfigEntry& e, const std::string& field) const {
    const double v = number(e, field);
    if (!(v > 0.0)) doc_.fail(e.line, field, "must be positive");
    return v;
  }

  template <class T>
  void get_int(const std::string& s, const std::string& k, T& out, long long lo, long long hi) const {
    if (const auto* e = find(s, k)) out = static_cast<T>(integer(*e, s + "." + k, lo, hi));
  }
  void get_positive(const std::string& s, const std::string& k, double& out) const {
    if (const auto* e = find(s, k)) out = positive(*e, s + "." + k);
  }
  void get_u64(const std::string& s, const std::string& k, std::uint64_t& out) const {
    if (const auto* e = find(s, k)) out = u64(*e, s + "." + k);
  }

  [[noreturn]] void fail(int line, const std::string& field, const std::string& problem) const {
    doc_.fail(line, field, problem);
  }

 private:
  const ConfigDocument& doc_;
};

FiberMap build_map(const ConfigDocument& doc, const Reader& rd, const std::string& section) {
  const auto& entries = doc.entries(section);
  const ConfigEntry* family = doc.find(section, "family");
  std::vector<AffineRow> rows;
  for (const auto& e : entries) {
    if (e.key == "family") continue;
    if (e.key != "affine") rd.fail(e.line, section + "." + e.key, "unknown key");
    const auto v = rd.numbers(e, section + ".affine");
    if (v.size() != 4) rd.fail(e.line, section + ".affine", "expected 'lo hi slope intercept'");
    rows.push_back({v[0], v[1], v[2], v[3]});
  }
  if (family && !rows.empty()) rd.fail(family->line, section + ".family", "cannot be combined with affine rows");
  try {
    if (!rows.empty()) return affine_map(rows);
    if (!family) rd.fail(doc.section_line(section), section, "needs a family or affine rows");
    const auto words = split_ws(lower(family->value));
    if (words.empty()) rd.fail(family->line, section + ".family", "empty value");
    if (words[0] == "doubling" && words.size() == 1) return doubling_map();
    if (words[0] == "tripling" && words.size() == 1) return tripling_map();
    if (words[0] == "gauss") {
      std::size_t k = 64;
      if (words.size() == 2) k = static_cast<std::size_t>(rd.integer({"", words[1], family->line}, section + ".family", 1, 100000));
      if (words.size() > 2) rd.fail(family->line, section + ".family", "expected 'gauss <K_max>'");
      return gauss_map(k);
    }
    rd.fail(family->line, section + ".family", "unknown family '" + family->value + "' (doubling, tripling, gauss <K>)");
  } catch (const ValidationError& err) {
    const std::string what = err.what();
    if (what.rfind(doc.source(), 0) == 0) throw;
    rd.fail(family ? family->line : doc.section_line(section), section, what);
  }
}

}  // namespace

double parse_number(std::string_view token) {
  const std::string t = trim(token);
  if (t.empty()) throw ValidationError("empty number");
  const auto slash = t.find('/');
  if (slash == std::string::npos) return parse_plain(t);
  const double p = parse_plain(trim(std::string_view(t).substr(0, slash)));
  const double q = parse_plain(trim(std::string_view(t).substr(slash + 1)));
  if (q == 0.0) throw ValidationError("'" + t + "' divides by zero");
  return p / q;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ConfigDocument ConfigDocument::parse(std::string_view text, std::string source) {
  ConfigDocument doc;
  doc.source_ = std::move(source);
  std::string current;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') doc.fail(line_no, "section", "missing ']'");
      current = lower(trim(line.substr(1, line.size() - 2)));
      if (current.empty()) doc.fail(line_no, "section", "empty section name");
      if (doc.sections_.count(current)) doc.fail(line_no, current, "section repeated");
      doc.sections_[current];
      doc.section_lines_[current] = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) doc.fail(line_no, current.empty() ? "line" : current, "expected 'key = value'");
    if (current.empty()) doc.fail(line_no, "line", "key outside any section");
    ConfigEntry e{lower(trim(line.substr(0, eq))), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty()) doc.fail(line_no, current, "empty key");
    if (e.value.empty()) doc.fail(line_no, current + "." + e.key, "empty value");
    doc.sections_[current].push_back(std::move(e));
  }
  return doc;
}

std::vector<std::string> ConfigDocument::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : sections_) out.push_back(name);
  return out;
}

const std::vector<ConfigEntry>& ConfigDocument::entries(const std::string& section) const {
  static const std::vector<ConfigEntry> empty;
  const auto it = sections_.find(section);
  return it == sections_.end() ? empty : it->second;
}

const ConfigEntry* ConfigDocument::find(const std::string& section, const std::string& key) const {
  const ConfigEntry* hit = nullptr;
  for (const auto& e : entries(section)) {
    if (e.key != key) continue;
    if (hit) fail(e.line, section + "." + key, "key repeated");
    hit = &e;
  }
  return hit;
}

int ConfigDocument::section_line(const std::string& section) const {
  const auto it = section_lines_.find(section);
  return it == section_lines_.end() ? 0 : it->second;
}

std::string ConfigDocument::canonical() const {
  std::string out;
  for (const auto& [name, entries] : sections_) {
    out += "[" + name + "]\n";
    std::vector<const ConfigEntry*> sorted;
    for (const auto& e : entries) sorted.push_back(&e);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->key < b->key; });
    for (const auto* e : sorted) {
      std::string v;
      for (const auto& t : split_ws(e->value)) v += (v.empty() ? "" : " ") + t;
      out += e->key + "=" + v + "\n";
    }
  }
  return out;
}

void ConfigDocument::fail(int line, const std::string& field, const std::string& problem) const {
  throw ValidationError(source_ + ":" + std::to_string(line) + ": " + field + ": " + problem);
}

ExperimentConfig parse_config(std::string_view text, std::string source) {
  const ConfigDocument doc = ConfigDocument::parse(text, std::move(source));
  const Reader rd(doc);
  ExperimentConfig cfg;
  cfg.canonical = doc.canonical();
  cfg.hash = fnv1a64(cfg.canonical);

  for (const auto& name : doc.sections()) {
    if (name.rfind("map.", 0) == 0) continue;
    const auto it = known_keys().find(name);
    if (it == known_keys().end()) doc.fail(doc.section_line(name), name, "unknown section");
    if (name == "hole") continue;
    for (const auto& e : doc.entries(name)) {
      std::string key = e.key;
      if (name == "potential") key = key.substr(0, key.find('.'));
      if (!it->second.count(key)) doc.fail(e.line, name + "." + e.key, "unknown key");
    }
  }

  if (const auto* e = doc.find("scenario", "name")) cfg.name = e->value;

  // Base.
  if (!doc.has_section("base")) doc.fail(0, "base", "section missing");
  const auto* kind = doc.find("base", "kind");
  const std::string base_kind = kind ? lower(kind->value) : "finite-cycle";
  std::vector<double> weights;
  if (const auto* e = doc.find("base", "weights")) weights = rd.numbers(*e, "base.weights");
  std::size_t symbols = 0;
  try {
    if (base_kind == "finite-cycle") {
      if (const auto* e = doc.find("base", "permutation")) {
        std::vector<std::size_t> succ;
        for (double v : rd.numbers(*e, "base.permutation")) {
          if (v < 0 || v != std::floor(v)) rd.fail(e->line, "base.permutation", "entries must be fiber indices");
          succ.push_back(static_cast<std::size_t>(v));
        }
        if (const auto* s = doc.find("base", "size"); s && rd.integer(*s, "base.size", 1, 1 << 20) != static_cast<long long>(succ.size())) {
          rd.fail(s->line, "base.size", "does not match the permutation length");
        }
        cfg.system.base = BaseSystem::finite_cycle(std::move(succ), weights);
      } else {
        std::size_t n = 1;
        rd.get_int("base", "size", n, 1, 1 << 20);
        cfg.system.base = BaseSystem::cycle(n, weights);
      }
      symbols = cfg.system.base.size();
    } else if (base_kind == "orbit-window") {
      const auto* seed = doc.find("base", "seed");
      if (!seed) doc.fail(doc.section_line("base"), "base.seed", "required for orbit windows (symbols are sampled)");
      std::size_t half = 0;
      // `window` is accepted as a synonym; both give N in ω_{-N}..ω_N.
      if (doc.find("base", "half_width") && doc.find("base", "window")) {
        doc.fail(doc.find("base", "window")->line, "base.window", "conflicts with base.half_width");
      }
      rd.get_int("base", "half_width", half, 1, 1 << 16);
      rd.get_int("base", "window", half, 1, 1 << 16);
      if (half == 0) doc.fail(doc.section_line("base"), "base.half_width", "required for orbit windows");
      symbols = 2;
      rd.get_int("base", "symbols", symbols, 1, 1024);
      std::vector<double> probs;
      if (const auto* e = doc.find("base", "probs")) probs = rd.numbers(*e, "base.probs");
      cfg.system.base = BaseSystem::orbit_window(half, symbols, rd.u64(*seed, "base.seed"), probs);
    } else {
      rd.fail(kind->line, "base.kind", "expected finite-cycle or orbit-window");
    }
  } catch (const ValidationError& err) {
    const std::string what = err.what();
    if (what.rfind(doc.source(), 0) == 0) throw;
    rd.fail(doc.section_line("base"), "base", what);
  }

  // Maps, one per symbol.
  for (std::size_t s = 0; s < symbols; ++s) {
    const std::string section = "map." + std::to_string(s);
    if (!doc.has_section(section)) doc.fail(doc.section_line("base"), section, "missing map section for fiber " + std::to_string(s));
    cfg.system.maps.push_back(build_map(doc, rd, section));
  }
  for (const auto& name : doc.sections()) {
    if (name.rfind("map.", 0) != 0) continue;
    const std::string idx = name.substr(4);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), v);
    if (ec != std::errc() || ptr != idx.data() + idx.size() || v >= symbols) {
      doc.fail(doc.section_line(name), name, "does not name a fiber of the base");
    }
  }

  // Hole.
  std::vector<IntervalSet> holes(symbols);
  for (const auto& e : doc.entries("hole")) {
    std::size_t s = 0;
    const auto [ptr, ec] = std::from_chars(e.key.data(), e.key.data() + e.key.size(), s);
    if (ec != std::errc() || ptr != e.key.data() + e.key.size() || s >= symbols) {
      rd.fail(e.line, "hole." + e.key, "does not name a fiber of the base");
    }
    const auto v = rd.numbers(e, "hole." + e.key);
    if (v.empty() || v.size() % 2 != 0) rd.fail(e.line, "hole." + e.key, "expected pairs 'a b'");
    std::vector<Interval> parts;
    for (std::size_t k = 0; k < v.size(); k += 2) {
      if (!(0.0 <= v[k] && v[k] < v[k + 1] && v[k + 1] <= 1.0)) {
        rd.fail(e.line, "hole." + e.key, "intervals need 0 ≤ a < b ≤ 1");
      }
      parts.push_back({v[k], v[k + 1]});
    }
    holes[s] = holes[s].unite(IntervalSet(parts));
  }
  cfg.system.hole = Hole(std::move(holes));
  try {
    cfg.system.validate();
  } catch (const ValidationError& err) {
    rd.fail(doc.section_line("base"), "system", err.what());
  }

  // Potential.
  {
    const auto* pk = doc.find("potential", "kind");
    const std::string k = pk ? lower(pk->value) : "geometric-derivative";
    auto per_symbol = [&](const std::string& key) {
      std::vector<const ConfigEntry*> out;
      if (const auto* e = doc.find("potential", key)) out.push_back(e);
      bool any_indexed = false;
      std::vector<const ConfigEntry*> indexed(symbols, nullptr);
      for (const auto& e : doc.entries("potential")) {
        if (e.key.rfind(key + ".", 0) != 0) continue;
        std::size_t s = 0;
        const std::string idx = e.key.substr(key.size() + 1);
        const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), s);
        if (ec != std::errc() || ptr != idx.data() + idx.size() || s >= symbols) {
          rd.fail(e.line, "potential." + e.key, "does not name a fiber of the base");
        }
        indexed[s] = &e;
        any_indexed = true;
      }
      if (!any_indexed) return out;
      if (!out.empty()) rd.fail(out[0]->line, "potential." + key, "mixes a shared and per-fiber values");
      for (std::size_t s = 0; s < symbols; ++s) {
        if (!indexed[s]) rd.fail(doc.section_line("potential"), "potential." + key + "." + std::to_string(s), "missing");
      }
      return indexed;
    };
    if (k == "geometric-derivative" || k == "geometric") {
      cfg.potential = Potential::geometric();
    } else if (k == "constant-per-branch" || k == "constant") {
      std::vector<std::vector<double>> rows;
      for (const auto* e : per_symbol("values")) {
        auto v = rd.numbers(*e, "potential." + e->key);
        for (double x : v) {
          if (!(x > 0.0)) rd.fail(e->line, "potential." + e->key, "weights must be positive");
        }
        rows.push_back(std::move(v));
      }
      if (rows.empty()) rd.fail(doc.section_line("potential"), "potential.values", "required for constant-per-branch");
      cfg.potential = Potential::constant_per_branch(std::move(rows));
    } else if (k == "expr" || k == "expression") {
      std::vector<Expression> exprs;
      for (const auto* e : per_symbol("expr")) {
        try {
          exprs.push_back(Expression::parse(e->value));
        } catch (const ValidationError& err) {
          rd.fail(e->line, "potential." + e->key, err.what());
        }
      }
      if (exprs.empty()) rd.fail(doc.section_line("potential"), "potential.expr", "required for expr potentials");
      cfg.potential = Potential::expression(std::move(exprs));
    } else {
      rd.fail(pk->line, "potential.kind", "expected geometric-derivative, constant-per-branch or expr");
    }
    for (std::size_t i = 0; i < cfg.system.base.size(); ++i) {
      try {
        (void)summability_report(cfg.potential, cfg.system, FiberId{i});
      } catch (const ValidationError& err) {
        rd.fail(doc.section_line("potential"), "potential", err.what());
      }
    }
  }

  rd.get_int("discretization", "cells", cfg.discretization.cells, 2, 1 << 20);
  rd.get_int("discretization", "depth", cfg.discretization.depth, 0, 16);

  rd.get_positive("solver", "tolerance", cfg.solver.tolerance);
  rd.get_int("solver", "max_iterations", cfg.solver.max_iterations, 1, 100000000);

  AnalysisSettings& a = cfg.analysis;
  rd.get_int("analysis", "functional_depth", a.functional_depth, 1, 1000);
  rd.get_int("analysis", "samples", a.samples, 1, 1000000);
  rd.get_u64("analysis", "seed", a.seed);
  rd.get_int("analysis", "fiber", a.fiber, 0, 1 << 20);
  if (a.fiber >= cfg.system.base.size()) {
    rd.fail(doc.find("analysis", "fiber")->line, "analysis.fiber", "outside the base");
  }
  rd.get_int("analysis", "escape_n_max", a.escape_n_max, 2, 100000);
  rd.get_int("analysis", "geometric_depth", a.geometric_depth, 0, 64);
  rd.get_int("analysis", "correlation_n_max", a.correlation_n_max, 2, 100000);
  rd.get_int("analysis", "invariance_depth", a.invariance_depth, 0, 32);
  rd.get_int("analysis", "invariance_sets", a.invariance_sets, 1, 1 << 20);
  rd.get_int("analysis", "contraction_iterates", a.contraction_iterates, 0, 100000);
  rd.get_int("analysis", "contraction_pairs", a.contraction_pairs, 1, 100000);
  rd.get_positive("analysis", "tolerance", a.tolerance);
  for (auto [key, target] : {std::pair{"observable_f", &a.observable_f}, std::pair{"observable_g", &a.observable_g}}) {
    if (const auto* e = doc.find("analysis", key)) {
      try {
        (void)Expression::parse(e->value);
      } catch (const ValidationError& err) {
        rd.fail(e->line, std::string("analysis.") + key, err.what());
      }
      *target = e->value;
    }
  }

  ConeParams& c = cfg.cones;
  if (const auto* e = doc.find("cones", "a")) {
    c.a = lower(e->value) == "auto" ? 0.0 : rd.positive(*e, "cones.a");
  }
  rd.get_positive("cones", "u", c.u);
  rd.get_positive("cones", "v", c.v);
  rd.get_positive("cones", "epsilon", c.epsilon);
  rd.get_int("cones", "depth", c.depth, 1, 1000);
  rd.get_int("cones", "samples", c.samples, 1, 1000000);
  rd.get_int("cones", "max_level", c.max_level, 1, 64);
  rd.get_int("cones", "coating_cap", c.coating_cap, 2, 100000);
  c.seed = a.seed;
  rd.get_u64("cones", "seed", c.seed);
  try {
    c.validate();
  } catch (const ValidationError& err) {
    rd.fail(doc.section_line("cones"), "cones", err.what());
  }

  if (const auto* e = doc.find("outputs", "dir")) cfg.outputs.dir = e->value;
  if (const auto* e = doc.find("outputs", "format")) {
    cfg.outputs.format = lower(e->value);
    if (cfg.outputs.format != "csv" && cfg.outputs.format != "json") rd.fail(e->line, "outputs.format", "expected csv or json");
  }
  if (const auto* e = doc.find("outputs", "export_matrices")) {
    const std::string v = lower(e->value);
    if (v != "true" && v != "false") rd.fail(e->line, "outputs.export_matrices", "expected true or false");
    cfg.outputs.export_matrices = v == "true";
  }
  if (const auto* e = doc.find("check", "cones")) {
    const std::string v = lower(e->value);
    if (v != "true" && v != "false") rd.fail(e->line, "check.cones", "expected true or false");
    cfg.check.cones = v == "true";
  }
  rd.get_positive("check", "escape_tolerance", cfg.check.escape_tolerance);
  rd.get_positive("check", "start_tolerance", cfg.check.start_tolerance);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path + ":0: config: cannot open file");
  std::ostringstream text;
  text << in.rdbuf();
  ExperimentConfig cfg = parse_config(text.str(), path);
  if (cfg.name.empty()) {
    std::string stem = path.substr(path.find_last_of('/') + 1);
    cfg.name = stem.substr(0, stem.find('.'));
  }
  return cfg;
}

}  // namespace openrpf
