#include "qcoll/market_io.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "qcoll/errors.hpp"

namespace qcoll {

namespace {

using nlohmann::json;

class SchemaReader {
 public:
  explicit SchemaReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw InputError(source_ + ": " + path + ": " + msg);
  }

  const json& member(const json& obj, const std::string& path, const char* key) const {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, std::string("missing required key '") + key + "'");
    return *it;
  }

  void expect_object(const json& v, const std::string& path,
                     std::initializer_list<const char*> allowed) const {
    if (!v.is_object()) fail(path, "expected an object");
    std::set<std::string> keys(allowed.begin(), allowed.end());
    for (auto it = v.begin(); it != v.end(); ++it)
      if (!keys.count(it.key())) fail(path + "." + it.key(), "unknown key");
  }

  double number(const json& obj, const std::string& path, const char* key) const {
    const json& v = member(obj, path, key);
    const std::string p = path + "." + key;
    if (!v.is_number()) fail(p, "expected a number");
    return v.get<double>();
  }

 private:
  std::string source_;
};

std::string position(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Market Market::with_rho(double rho) const { return {setup.with_rho(rho), equity, fx}; }

Market parse_market(std::string_view text, std::string_view source) {
  const std::string src(source);
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // e.byte is one past the offending character.
    throw InputError(src + ": " + position(text, e.byte == 0 ? 0 : e.byte - 1) +
                     ": invalid JSON (" + e.what() + ")");
  }

  const SchemaReader r(src);
  r.expect_object(doc, "$", {"setup", "surfaces"});

  const json& js = r.member(doc, "$", "setup");
  r.expect_object(js, "$.setup", {"spot_S", "spot_X", "r_F", "r_D", "div_yield", "rho"});
  MarketSetup setup;
  setup.spot_S = r.number(js, "$.setup", "spot_S");
  setup.spot_X = r.number(js, "$.setup", "spot_X");
  setup.r_F = r.number(js, "$.setup", "r_F");
  setup.r_D = r.number(js, "$.setup", "r_D");
  setup.div_yield = r.number(js, "$.setup", "div_yield");
  setup.rho = r.number(js, "$.setup", "rho");
  try {
    setup.validate();
  } catch (const InputError& e) {
    r.fail("$.setup", e.what());
  }

  const json& surfaces = r.member(doc, "$", "surfaces");
  if (!surfaces.is_array()) r.fail("$.surfaces", "expected an array");
  std::vector<SmilePillar> pillars[2];
  bool seen[2] = {false, false};
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    const std::string path = "$.surfaces[" + std::to_string(i) + "]";
    const json& s = surfaces[i];
    r.expect_object(s, path, {"asset", "pillars"});
    const json& tag = r.member(s, path, "asset");
    if (!tag.is_string() || (tag != "EQ" && tag != "FX"))
      r.fail(path + ".asset", "expected \"EQ\" or \"FX\"");
    const int idx = tag == "EQ" ? 0 : 1;
    if (seen[idx]) r.fail(path + ".asset", "duplicate surface for " + tag.get<std::string>());
    seen[idx] = true;

    const json& ps = r.member(s, path, "pillars");
    if (!ps.is_array() || ps.empty()) r.fail(path + ".pillars", "expected a non-empty array");
    for (std::size_t j = 0; j < ps.size(); ++j) {
      const std::string pp = path + ".pillars[" + std::to_string(j) + "]";
      const json& p = ps[j];
      r.expect_object(p, pp, {"T", "params", "K_lo", "K_hi"});
      SmilePillar pillar;
      pillar.maturity = r.number(p, pp, "T");
      const json& params = r.member(p, pp, "params");
      r.expect_object(params, pp + ".params", {"atm_vol", "skew", "curvature"});
      pillar.params.atm_vol = r.number(params, pp + ".params", "atm_vol");
      pillar.params.skew = r.number(params, pp + ".params", "skew");
      pillar.params.curvature = r.number(params, pp + ".params", "curvature");
      pillar.strike_lo = r.number(p, pp, "K_lo");
      pillar.strike_hi = r.number(p, pp, "K_hi");
      pillars[idx].push_back(pillar);
    }
  }
  if (!seen[0]) r.fail("$.surfaces", "no EQ surface");
  if (!seen[1]) r.fail("$.surfaces", "no FX surface");

  return {setup, VolSurface(setup, Asset::Equity, std::move(pillars[0])),
          VolSurface(setup, Asset::Fx, std::move(pillars[1]))};
}

Market load_market(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open market file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_market(buf.str(), path.string());
}

}  // namespace qcoll
