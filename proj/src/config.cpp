#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "csv.hpp"
#include "error.hpp"
#include "synth.hpp"

namespace dynrec {

namespace {

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

[[noreturn]] void bad(const KeyValueFile& kv, const std::string& key, const std::string& why) {
  fail(ErrorKind::kInvalidArgument,
       kv.source() + " line " + std::to_string(kv.line_of(key)) + ": " + key + " " + why);
}

double as_double(const KeyValueFile& kv, const std::string& key) {
  auto v = csv::parse_number(*kv.get(key));
  if (!v) bad(kv, key, "expects a number, got '" + *kv.get(key) + "'");
  return *v;
}

int as_int(const KeyValueFile& kv, const std::string& key) {
  const std::string s = *kv.get(key);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(kv, key, "expects an integer, got '" + s + "'");
  return v;
}

std::uint64_t as_u64(const KeyValueFile& kv, const std::string& key) {
  const std::string s = *kv.get(key);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad(kv, key, "expects an unsigned integer, got '" + s + "'");
  return v;
}

bool as_bool(const KeyValueFile& kv, const std::string& key) {
  const std::string s = *kv.get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad(kv, key, "expects true/false, got '" + s + "'");
}

Date as_date(const KeyValueFile& kv, const std::string& key) {
  auto d = try_parse_date(*kv.get(key));
  if (!d) bad(kv, key, "expects a YYYY-MM-DD date, got '" + *kv.get(key) + "'");
  return *d;
}

std::vector<std::string> as_list(const KeyValueFile& kv, const std::string& key) {
  std::vector<std::string> out;
  for (auto& c : csv::split_line(*kv.get(key)))
    if (!c.empty()) out.push_back(c);
  return out;
}

std::vector<Date> as_dates(const KeyValueFile& kv, const std::string& key) {
  std::vector<Date> out;
  for (const auto& s : as_list(kv, key)) {
    auto d = try_parse_date(s);
    if (!d) bad(kv, key, "has a malformed date '" + s + "'");
    out.push_back(*d);
  }
  return out;
}

std::vector<double> as_numbers(const KeyValueFile& kv, const std::string& key) {
  std::vector<double> out;
  for (const auto& s : as_list(kv, key)) {
    auto v = csv::parse_number(s);
    if (!v) bad(kv, key, "has a malformed number '" + s + "'");
    out.push_back(*v);
  }
  return out;
}

void check_rate(const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::kInvalidArgument, std::string(name) + " must be in [0, 1]");
}

}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& source) {
  KeyValueFile kv;
  kv.source_ = source;
  std::size_t pos = 0;
  int line = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view raw(text.data() + pos, nl - pos);
    ++line;
    pos = nl + 1;
    if (auto h = raw.find('#'); h != std::string_view::npos) raw = raw.substr(0, h);
    const std::string body = trim(raw);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::kParse, source + " line " + std::to_string(line) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) fail(ErrorKind::kParse, source + " line " + std::to_string(line) + ": empty key");
    if (kv.values_.count(key))
      fail(ErrorKind::kParse, source + " line " + std::to_string(line) + ": duplicate key '" + key + "'");
    kv.values_[key] = value;
    kv.lines_[key] = line;
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) fail(ErrorKind::kInvalidArgument, "config file not found: " + path.string());
  return parse(csv::read_text(path), path.string());
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

int KeyValueFile::line_of(const std::string& key) const {
  auto it = lines_.find(key);
  return it == lines_.end() ? 0 : it->second;
}

// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  for (const auto& [name, p] : {std::pair<const char*, const std::filesystem::path*>{"fundamentals", &fundamentals},
                                {"prices", &prices},
                                {"universe", &universe}})
    if (p->empty()) fail(ErrorKind::kInvalidArgument, std::string(name) + " path is required (or set data_dir)");
  dynrec::validate(window);
  if (!(pick_fraction > 0.0 && pick_fraction <= 1.0))
    fail(ErrorKind::kInvalidArgument, "pick_fraction must be in (0, 1]");
  check_rate("cost_rate", cost_rate);
  check_rate("risk_free", risk_free);
  check_rate("ub_base", ub_base);
  if (!(ub_base > 0.0)) fail(ErrorKind::kInvalidArgument, "ub_base must be positive");
  check_rate("factor_missing_max", cleaning.factor_missing_max);
  check_rate("sector_missing_max", cleaning.sector_missing_max);
  if (frontier_points < 2) fail(ErrorKind::kInvalidArgument, "frontier_points must be at least 2");
  if (!(initial_value > 0.0)) fail(ErrorKind::kInvalidArgument, "initial_value must be positive");
  if (methods.empty()) fail(ErrorKind::kInvalidArgument, "methods must list at least one allocation method");
  if (families.empty()) fail(ErrorKind::kInvalidArgument, "models must list at least one family");
  if (covariance.lookback < 2 || covariance.min_returns < 2 || covariance.min_returns > covariance.lookback)
    fail(ErrorKind::kInvalidArgument, "covariance window: need 2 <= cov_min_returns <= cov_lookback");
  if (data_start && data_end && !(*data_start < *data_end))
    fail(ErrorKind::kInvalidArgument, "data_start must precede data_end");
  if (in_sample_end && data_start && *in_sample_end < *data_start)
    fail(ErrorKind::kInvalidArgument, "in_sample_end precedes data_start");
  for (const auto& s : model_specs()) s.validate();
}

std::vector<ModelSpec> RunConfig::model_specs() const {
  std::vector<ModelSpec> out;
  for (auto f : families) {
    ModelSpec s = ModelSpec::defaults(f, seed);
    if (auto it = model_overrides.find(f); it != model_overrides.end())
      for (const auto& [k, v] : it->second) s.hyperparameters[k] = v;
    out.push_back(std::move(s));
  }
  return out;
}

RunConfig parse_run_config(const KeyValueFile& kv, const std::filesystem::path& base_dir) {
  RunConfig c;
  auto path = [&](const std::string& key) {
    std::filesystem::path p(*kv.get(key));
    return p.is_absolute() ? p : base_dir / p;
  };
  std::filesystem::path dir = base_dir;
  if (kv.has("data_dir")) dir = path("data_dir");
  c.fundamentals = dir / "fundamentals.csv";
  c.prices = dir / "prices.csv";
  c.universe = dir / "universe.csv";
  if (kv.has("data_dir") && std::filesystem::exists(dir / "trading_days.csv")) c.trading_days = dir / "trading_days.csv";

  for (const auto& [key, value] : kv.values()) {
    if (key == "data_dir") continue;
    else if (key == "fundamentals") c.fundamentals = path(key);
    else if (key == "prices") c.prices = path(key);
    else if (key == "universe") c.universe = path(key);
    else if (key == "trading_days") c.trading_days = path(key);
    else if (key == "benchmark") c.benchmark = path(key);
    else if (key == "data_start") c.data_start = as_date(kv, key);
    else if (key == "data_end") c.data_end = as_date(kv, key);
    else if (key == "in_sample_end") c.in_sample_end = as_date(kv, key);
    else if (key == "min_train") c.window.min_train = as_int(kv, key);
    else if (key == "max_train") c.window.max_train = as_int(kv, key);
    else if (key == "test_quarters") c.window.test = as_int(kv, key);
    else if (key == "pick_fraction") c.pick_fraction = as_double(kv, key);
    else if (key == "cost_rate") c.cost_rate = as_double(kv, key);
    else if (key == "risk_free") c.risk_free = as_double(kv, key);
    else if (key == "ub_base") c.ub_base = as_double(kv, key);
    else if (key == "frontier_points") c.frontier_points = as_int(kv, key);
    else if (key == "initial_value") c.initial_value = as_double(kv, key);
    else if (key == "factor_missing_max") c.cleaning.factor_missing_max = as_double(kv, key);
    else if (key == "sector_missing_max") c.cleaning.sector_missing_max = as_double(kv, key);
    else if (key == "cov_lookback") c.covariance.lookback = as_int(kv, key);
    else if (key == "cov_min_returns") c.covariance.min_returns = as_int(kv, key);
    else if (key == "holidays") c.holidays = as_dates(kv, key);
    else if (key == "parallel") c.parallel = as_bool(kv, key);
    else if (key == "seed") c.seed = as_u64(kv, key);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& m : as_list(kv, key)) {
        try {
          auto am = method_from_name(m);
          if (std::find(c.methods.begin(), c.methods.end(), am) == c.methods.end()) c.methods.push_back(am);
        } catch (const Error& e) {
          bad(kv, key, e.what());
        }
      }
    } else if (key == "models") {
      c.families.clear();
      for (const auto& m : as_list(kv, key)) {
        auto f = models::family_from_name(m);
        if (!f) bad(kv, key, "names an unknown model family '" + m + "'");
        if (std::find(c.families.begin(), c.families.end(), *f) == c.families.end()) c.families.push_back(*f);
      }
    } else if (auto dot = key.find('.'); dot != std::string::npos) {
      auto f = models::family_from_name(key.substr(0, dot));
      if (!f) bad(kv, key, "is not a recognised setting");
      c.model_overrides[*f][key.substr(dot + 1)] = as_double(kv, key);
    } else {
      bad(kv, key, "is not a recognised setting");
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kInvalidArgument, kv.source() + ": " + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  auto kv = KeyValueFile::load(path);
  return parse_run_config(kv, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
  if (sectors < 1 || sectors > int(kGicsSectors.size()))
    fail(ErrorKind::kInvalidArgument, "sectors must be between 1 and 11");
  if (stocks_per_sector < 1) fail(ErrorKind::kInvalidArgument, "stocks_per_sector must be positive");
  if (quarters < 2) fail(ErrorKind::kInvalidArgument, "quarters must be at least 2");
  if (!is_quarter_start(start)) fail(ErrorKind::kInvalidArgument, "start must be the first day of a quarter");
  if (!(noise_sigma >= 0.0)) fail(ErrorKind::kInvalidArgument, "noise_sigma must be non-negative");
  if (!(price_vol >= 0.0) || !(market_vol >= 0.0))
    fail(ErrorKind::kInvalidArgument, "price_vol and market_vol must be non-negative");
  check_rate("missing_rate", missing_rate);
  check_rate("late_rate", late_rate);
  auto check_beta = [](const std::vector<double>& b, const std::string& what) {
    if (b.size() != 20) fail(ErrorKind::kInvalidArgument, what + " needs 20 coefficients, got " + std::to_string(b.size()));
    for (double v : b)
      if (!std::isfinite(v)) fail(ErrorKind::kInvalidArgument, what + " has a non-finite coefficient");
  };
  check_beta(beta, "beta");
  for (const auto& [s, b] : sector_beta) {
    if (!is_gics_sector(s)) fail(ErrorKind::kInvalidArgument, "beta." + std::to_string(s) + ": not a GICS sector");
    check_beta(b, "beta." + std::to_string(s));
  }
}

const std::vector<double>& SynthConfig::beta_for(int sector) const {
  auto it = sector_beta.find(sector);
  return it == sector_beta.end() ? beta : it->second;
}

SynthConfig parse_synth_config(const KeyValueFile& kv) {
  SynthConfig c;
  for (const auto& [key, value] : kv.values()) {
    if (key == "sectors") c.sectors = as_int(kv, key);
    else if (key == "stocks_per_sector") c.stocks_per_sector = as_int(kv, key);
    else if (key == "quarters") c.quarters = as_int(kv, key);
    else if (key == "start") c.start = as_date(kv, key);
    else if (key == "noise_sigma") c.noise_sigma = as_double(kv, key);
    else if (key == "price_vol") c.price_vol = as_double(kv, key);
    else if (key == "market_vol") c.market_vol = as_double(kv, key);
    else if (key == "intercept") c.intercept = as_double(kv, key);
    else if (key == "beta") c.beta = as_numbers(kv, key);
    else if (key == "missing_rate") c.missing_rate = as_double(kv, key);
    else if (key == "late_rate") c.late_rate = as_double(kv, key);
    else if (key == "holidays") c.holidays = as_dates(kv, key);
    else if (key == "seed") c.seed = as_u64(kv, key);
    else if (key.rfind("beta.", 0) == 0) {
      int s = 0;
      const std::string code = key.substr(5);
      auto [p, ec] = std::from_chars(code.data(), code.data() + code.size(), s);
      if (ec != std::errc() || p != code.data() + code.size()) bad(kv, key, "needs a sector code suffix");
      c.sector_beta[s] = as_numbers(kv, key);
    } else {
      bad(kv, key, "is not a recognised synth setting");
    }
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kInvalidArgument, kv.source() + ": " + e.what());
  }
  return c;
}

SynthConfig load_synth_config(const std::filesystem::path& path) { return parse_synth_config(KeyValueFile::load(path)); }

}  // namespace dynrec
