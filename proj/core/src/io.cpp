#include "dsb/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "dsb/error.hpp"

namespace dsb {

namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic{'D', 'S', 'B', '1'};

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t get_le(std::span<const std::byte> bytes, std::size_t offset, std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= std::to_integer<std::uint64_t>(bytes[offset + i]) << (8 * i);
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "cannot read '" + path.string() + "'");
  return text;
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open '" + path.string() + "' for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  out.flush();
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write '" + path.string() + "'");
}

json meta_json(const SampleMeta& m) {
  json j;
  j["seed"] = m.seed;
  j["sampler"] = m.sampler;
  j["schedule"] = m.schedule;
  j["init"] = m.init;
  j["h"] = m.h;
  j["T"] = m.terminal_time;
  j["steps"] = m.steps;
  j["score"] = m.score;
  j["stable"] = m.stable;
  j["first_unstable_step"] = m.first_unstable_step ? json(*m.first_unstable_step) : json(nullptr);
  return j;
}

template <class T>
void read_opt(const json& j, const char* key, T& dst) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) dst = it->get<T>();
}

SampleMeta meta_from_json(const json& j) {
  SampleMeta m;
  if (!j.is_object()) throw Error(ErrorCode::kBadMetadata, "metadata must be a JSON object");
  read_opt(j, "seed", m.seed);
  read_opt(j, "sampler", m.sampler);
  read_opt(j, "schedule", m.schedule);
  read_opt(j, "init", m.init);
  read_opt(j, "h", m.h);
  read_opt(j, "T", m.terminal_time);
  read_opt(j, "steps", m.steps);
  read_opt(j, "score", m.score);
  read_opt(j, "stable", m.stable);
  if (auto it = j.find("first_unstable_step"); it != j.end() && !it->is_null())
    m.first_unstable_step = it->get<std::size_t>();
  return m;
}

double finite_number(const json& j, const char* what) {
  if (!j.is_number()) throw Error(ErrorCode::kBadConfig, std::string(what) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::kBadConfig, std::string(what) + " must be finite");
  return v;
}

Vector number_list(const json& j, const char* what) {
  if (!j.is_array()) throw Error(ErrorCode::kBadConfig, std::string(what) + " must be an array");
  Vector out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(finite_number(e, what));
  return out;
}

Covariance covariance_from_json(const json& j, std::size_t dim) {
  if (!j.is_object()) throw Error(ErrorCode::kBadConfig, "covariance entries must be objects");
  const std::string type = j.value("type", "");
  if (!j.contains("data")) throw Error(ErrorCode::kBadConfig, "covariance entry lacks data");
  const json& data = j.at("data");
  if (type == "diagonal") {
    Vector v = number_list(data, "covariance data");
    if (v.size() != dim) throw Error(ErrorCode::kBadConfig, "diagonal covariance has the wrong length");
    return Covariance::diag(std::move(v));
  }
  if (type == "full") {
    Vector flat;
    if (data.is_array() && !data.empty() && data.front().is_array()) {
      if (data.size() != dim) throw Error(ErrorCode::kBadConfig, "full covariance has the wrong row count");
      for (const auto& row : data) {
        Vector r = number_list(row, "covariance row");
        if (r.size() != dim) throw Error(ErrorCode::kBadConfig, "full covariance row has the wrong length");
        flat.insert(flat.end(), r.begin(), r.end());
      }
    } else {
      flat = number_list(data, "covariance data");
      if (flat.size() != dim * dim) throw Error(ErrorCode::kBadConfig, "full covariance has the wrong size");
    }
    Matrix m(dim, dim);
    std::copy(flat.begin(), flat.end(), m.data().begin());
    return Covariance::dense(std::move(m));
  }
  throw Error(ErrorCode::kBadConfig, "covariance type must be 'diagonal' or 'full'");
}

json mixture_json(const GaussianMixture& mix) {
  json j;
  j["weights"] = mix.weights();
  j["means"] = mix.means();
  json covs = json::array();
  for (const auto& c : mix.covariances()) {
    if (c.kind == CovarianceKind::kDiagonal) {
      covs.push_back({{"type", "diagonal"}, {"data", c.diagonal}});
    } else {
      json rows = json::array();
      for (std::size_t i = 0; i < c.full.rows(); ++i) {
        json row = json::array();
        for (std::size_t k = 0; k < c.full.cols(); ++k) row.push_back(c.full(i, k));
        rows.push_back(std::move(row));
      }
      covs.push_back({{"type", "full"}, {"data", std::move(rows)}});
    }
  }
  j["covariances"] = std::move(covs);
  return j;
}

json parse_json_text(const std::string& text, ErrorCode code) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(code, std::string("malformed JSON: ") + e.what());
  }
}

PiecewisePolynomial polynomial_from_json(const json& j, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::kBadConfig, std::string(what) + " must be an object");
  PiecewisePolynomial p;
  if (j.contains("breaks")) p.breaks = number_list(j.at("breaks"), "breaks");
  if (!j.contains("coeffs") || !j.at("coeffs").is_array())
    throw Error(ErrorCode::kBadConfig, std::string(what) + " lacks a coeffs list");
  for (const auto& piece : j.at("coeffs")) p.coeffs.push_back(number_list(piece, "coeffs"));
  if (p.breaks.empty()) p.breaks.push_back(0.0);
  p.validate();
  return p;
}

json polynomial_json(const PiecewisePolynomial& p) { return {{"breaks", p.breaks}, {"coeffs", p.coeffs}}; }

json bound_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json perturbation_json(const Perturbation& p) {
  return {{"kind", std::string(to_string(p.kind))},
          {"magnitude", p.magnitude},
          {"seed", p.seed},
          {"frequency", p.frequency}};
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorCode::kBadConfig, "unknown key '" + key + "' in " + where);
  }
}

template <class Fn>
auto config_field(const char* key, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadConfig, std::string("bad value for '") + key + "': " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument)
      throw Error(ErrorCode::kBadConfig, std::string("bad value for '") + key + "': " + e.what());
    throw;
  }
}

template <class T>
T unsigned_field(const json& j, const char* key) {
  if (!j.is_number_unsigned()) throw Error(ErrorCode::kBadConfig, std::string(key) + " must be a non-negative integer");
  return j.get<T>();
}

std::filesystem::path resolve_relative(const std::string& file, const std::filesystem::path& base) {
  std::filesystem::path p(file);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

ScheduleSpec schedule_spec_from(const json& j) {
  return config_field("schedule", [&] {
    ScheduleSpec spec;
    if (j.is_string()) {
      spec.kind = j.get<std::string>();
    } else {
      check_keys(j, {"kind", "f", "g", "quadrature_step"}, "schedule");
      read_opt(j, "kind", spec.kind);
      read_opt(j, "quadrature_step", spec.quadrature_step);
      if (j.contains("f")) spec.f = polynomial_from_json(j.at("f"), "f");
      if (j.contains("g")) spec.g = polynomial_from_json(j.at("g"), "g");
    }
    if (spec.kind != "vp-linear" && spec.kind != "generic")
      throw Error(ErrorCode::kBadConfig, "schedule must be 'vp-linear' or 'generic'");
    if (spec.kind == "generic" && (spec.f.coeffs.empty() || spec.g.coeffs.empty()))
      throw Error(ErrorCode::kBadConfig, "generic schedules need f and g tables");
    if (!(spec.quadrature_step > 0.0)) throw Error(ErrorCode::kBadConfig, "quadrature_step must be positive");
    return spec;
  });
}

json row_json(const SweepRow& r) {
  return {{"swept_value", r.value},
          {"w2", std::isfinite(r.w2) ? json(r.w2) : json(nullptr)},
          {"eps", r.eps},
          {"finite", r.finite},
          {"stable", r.stable},
          {"n", r.n},
          {"seed", r.seed},
          {"wall_seconds", r.wall_seconds},
          {"first_unstable_step", r.first_unstable_step ? json(*r.first_unstable_step) : json(nullptr)}};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string sample_meta_to_json(const SampleMeta& meta) { return meta_json(meta).dump(); }

std::vector<std::byte> encode_samples(const SampleBatch& batch, ScalarWidth width) {
  if (batch.n == 0 || batch.d == 0) throw Error(ErrorCode::kBadHeader, "sample batches must have n > 0 and d > 0");
  if (batch.data.size() != batch.n * batch.d) throw Error(ErrorCode::kBadHeader, "payload size does not match n x d");
  for (double v : batch.data)
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteData, "refusing to write non-finite samples");

  const std::string meta = sample_meta_to_json(batch.meta);
  const std::size_t w = static_cast<std::size_t>(width);
  std::vector<std::byte> out;
  out.reserve(kSampleHeaderBytes + meta.size() + batch.data.size() * w);
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_u32(out, kSampleFileVersion);
  put_u64(out, batch.n);
  put_u64(out, batch.d);
  put_u32(out, static_cast<std::uint32_t>(width));
  put_u64(out, meta.size());
  for (char c : meta) out.push_back(static_cast<std::byte>(c));
  if (width == ScalarWidth::kF64) {
    for (double v : batch.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  } else {
    for (double v : batch.data) {
      const auto f = static_cast<float>(v);
      if (!std::isfinite(f)) throw Error(ErrorCode::kNonFiniteData, "sample overflows f32");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  return out;
}

SampleBatch decode_samples(std::span<const std::byte> bytes) {
  if (bytes.size() < kMagic.size()) throw Error(ErrorCode::kBadMagic, "file too short for the magic");
  for (std::size_t i = 0; i < kMagic.size(); ++i)
    if (bytes[i] != static_cast<std::byte>(kMagic[i])) throw Error(ErrorCode::kBadMagic, "not a DSB1 sample file");
  if (bytes.size() < 8) throw Error(ErrorCode::kBadHeader, "header truncated");
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kSampleFileVersion)
    throw Error(ErrorCode::kVersionMismatch, "unsupported version " + std::to_string(version));
  if (bytes.size() < kSampleHeaderBytes) throw Error(ErrorCode::kBadHeader, "header truncated");
  const std::uint64_t n = get_le(bytes, 8, 8);
  const std::uint64_t d = get_le(bytes, 16, 8);
  const auto width = static_cast<std::uint32_t>(get_le(bytes, 24, 4));
  const std::uint64_t meta_len = get_le(bytes, 28, 8);
  if (n == 0 || d == 0) throw Error(ErrorCode::kBadHeader, "n and d must be positive");
  if (width != 4 && width != 8) throw Error(ErrorCode::kBadHeader, "scalar width must be 4 or 8");

  const std::uint64_t remaining = bytes.size() - kSampleHeaderBytes;
  if (meta_len > remaining) throw Error(ErrorCode::kTruncatedPayload, "metadata extends past the end of the file");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  if (n > max / d || n * d > max / width) throw Error(ErrorCode::kBadHeader, "payload size overflows");
  const std::uint64_t payload = n * d * width;
  if (payload > remaining - meta_len) throw Error(ErrorCode::kTruncatedPayload, "payload shorter than n x d");
  if (payload < remaining - meta_len) throw Error(ErrorCode::kTrailingData, "bytes after the payload");

  SampleBatch batch;
  if (meta_len > 0) {
    const auto* p = reinterpret_cast<const char*>(bytes.data() + kSampleHeaderBytes);
    json meta = json::parse(p, p + meta_len, nullptr, false);
    if (meta.is_discarded()) throw Error(ErrorCode::kBadMetadata, "metadata is not valid JSON");
    try {
      batch.meta = meta_from_json(meta);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kBadMetadata, e.what());
    }
  }
  batch.n = n;
  batch.d = d;
  batch.data.resize(n * d);
  std::size_t offset = kSampleHeaderBytes + meta_len;
  for (std::size_t i = 0; i < batch.data.size(); ++i, offset += width) {
    const double v = width == 8 ? std::bit_cast<double>(get_le(bytes, offset, 8))
                                : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, offset, 4))));
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteData, "non-finite entry at index " + std::to_string(i));
    batch.data[i] = v;
  }
  return batch;
}

void write_samples(const SampleBatch& batch, const std::filesystem::path& path, ScalarWidth width) {
  const auto bytes = encode_samples(batch, width);
  write_file(path, bytes.data(), bytes.size());
}

SampleBatch read_samples(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  return decode_samples(std::as_bytes(std::span(raw.data(), raw.size())));
}

GaussianMixture parse_mixture_json(const std::string& text) {
  const json j = parse_json_text(text, ErrorCode::kBadConfig);
  if (!j.is_object()) throw Error(ErrorCode::kBadConfig, "mixture must be a JSON object");
  check_keys(j, {"weights", "means", "covariances"}, "mixture");
  if (!j.contains("weights") || !j.contains("means") || !j.contains("covariances"))
    throw Error(ErrorCode::kBadConfig, "mixture needs weights, means and covariances");
  Vector weights = number_list(j.at("weights"), "weights");
  const json& jm = j.at("means");
  const json& jc = j.at("covariances");
  if (!jm.is_array() || !jc.is_array() || jm.size() != weights.size() || jc.size() != weights.size())
    throw Error(ErrorCode::kBadConfig, "weights, means and covariances must have equal length");
  if (weights.empty()) throw Error(ErrorCode::kBadConfig, "mixture has no components");
  std::vector<Vector> means;
  for (const auto& m : jm) means.push_back(number_list(m, "mean"));
  const std::size_t dim = means.front().size();
  for (const auto& m : means)
    if (m.size() != dim || dim == 0) throw Error(ErrorCode::kBadConfig, "means must share a positive dimension");
  std::vector<Covariance> covs;
  for (const auto& c : jc) covs.push_back(covariance_from_json(c, dim));
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

GaussianMixture load_mixture(const std::filesystem::path& path) { return parse_mixture_json(read_file(path)); }

std::string mixture_to_json(const GaussianMixture& mixture) { return mixture_json(mixture).dump(2); }

SweepConfig parse_sweep_config(const std::string& text, const std::filesystem::path& base_dir) {
  const json j = parse_json_text(text, ErrorCode::kBadConfig);
  if (!j.is_object()) throw Error(ErrorCode::kBadConfig, "config must be a JSON object");
  check_keys(j,
             {"problem", "schedule", "sampler", "init", "metric", "values", "h", "T", "perturbation", "n", "seed",
              "window", "workers", "reference_file"},
             "config");
  SweepConfig cfg;
  if (auto it = j.find("problem"); it != j.end()) {
    config_field("problem", [&] {
      if (it->is_string()) {
        cfg.problem.builtin = it->get<std::string>();
        return 0;
      }
      check_keys(*it, {"builtin", "dim", "mixture_file"}, "problem");
      read_opt(*it, "builtin", cfg.problem.builtin);
      if (it->contains("dim")) cfg.problem.dim = unsigned_field<std::size_t>(it->at("dim"), "dim");
      if (it->contains("mixture_file"))
        cfg.problem.mixture_file = resolve_relative(it->at("mixture_file").get<std::string>(), base_dir).string();
      return 0;
    });
  }
  if (auto it = j.find("schedule"); it != j.end()) cfg.schedule = schedule_spec_from(*it);
  if (j.contains("sampler"))
    cfg.sampler = config_field("sampler", [&] { return parse_sampler_kind(j.at("sampler").get<std::string>()); });
  if (j.contains("init"))
    cfg.init = config_field("init", [&] { return parse_init_kind(j.at("init").get<std::string>()); });
  if (j.contains("metric"))
    cfg.metric = config_field("metric", [&] { return parse_moment_mode(j.at("metric").get<std::string>()); });
  if (j.contains("values")) cfg.values = number_list(j.at("values"), "values");
  if (j.contains("h")) cfg.h = finite_number(j.at("h"), "h");
  if (j.contains("T")) cfg.terminal_time = finite_number(j.at("T"), "T");
  if (auto it = j.find("perturbation"); it != j.end()) {
    config_field("perturbation", [&] {
      check_keys(*it, {"kind", "magnitude", "seed", "frequency"}, "perturbation");
      if (it->contains("kind")) cfg.perturbation.kind = parse_perturbation_kind(it->at("kind").get<std::string>());
      read_opt(*it, "magnitude", cfg.perturbation.magnitude);
      if (it->contains("seed")) cfg.perturbation.seed = unsigned_field<std::uint64_t>(it->at("seed"), "seed");
      read_opt(*it, "frequency", cfg.perturbation.frequency);
      return 0;
    });
  }
  if (j.contains("n")) cfg.n = unsigned_field<std::size_t>(j.at("n"), "n");
  if (j.contains("seed")) cfg.seed = unsigned_field<std::uint64_t>(j.at("seed"), "seed");
  if (auto it = j.find("window"); it != j.end()) {
    config_field("window", [&] {
      check_keys(*it, {"min", "max"}, "window");
      read_opt(*it, "min", cfg.window_min);
      read_opt(*it, "max", cfg.window_max);
      return 0;
    });
  }
  if (j.contains("workers"))
    cfg.workers = unsigned_field<std::size_t>(j.at("workers"), "workers");
  if (j.contains("reference_file"))
    cfg.reference_file = resolve_relative(j.at("reference_file").get<std::string>(), base_dir).string();
  return cfg;
}

ScheduleSpec parse_schedule_spec(const std::string& text) {
  return schedule_spec_from(parse_json_text(text, ErrorCode::kBadConfig));
}

SweepConfig load_sweep_config(const std::filesystem::path& path) {
  return parse_sweep_config(read_file(path), path.parent_path());
}

namespace {

json config_json(const SweepConfig& cfg) {
  json problem = {{"builtin", cfg.problem.builtin}, {"dim", cfg.problem.dim}};
  if (!cfg.problem.mixture_file.empty()) problem["mixture_file"] = cfg.problem.mixture_file;
  json schedule = {{"kind", cfg.schedule.kind}};
  if (cfg.schedule.kind == "generic") {
    schedule["f"] = polynomial_json(cfg.schedule.f);
    schedule["g"] = polynomial_json(cfg.schedule.g);
    schedule["quadrature_step"] = cfg.schedule.quadrature_step;
  }
  json j = {{"problem", problem},
            {"schedule", schedule},
            {"sampler", std::string(to_string(cfg.sampler))},
            {"init", std::string(to_string(cfg.init))},
            {"metric", std::string(to_string(cfg.metric))},
            {"values", cfg.values},
            {"h", cfg.h},
            {"T", cfg.terminal_time},
            {"perturbation", perturbation_json(cfg.perturbation)},
            {"n", cfg.n},
            {"seed", cfg.seed},
            {"window", {{"min", bound_json(cfg.window_min)}, {"max", bound_json(cfg.window_max)}}},
            {"workers", cfg.workers}};
  if (!cfg.reference_file.empty()) j["reference_file"] = cfg.reference_file;
  return j;
}

}  // namespace

std::string sweep_config_to_json(const SweepConfig& cfg) { return config_json(cfg).dump(2); }

void write_report_csv(const ConvergenceReport& report, std::ostream& out) {
  out << "swept_value,w2,eps,stable,n,seed\n";
  for (const auto& r : report.rows) {
    out << format_double(r.value) << ',' << format_double(r.w2) << ',' << format_double(r.eps) << ','
        << (r.stable ? 1 : 0) << ',' << r.n << ',' << r.seed << '\n';
  }
}

std::string report_csv(const ConvergenceReport& report) {
  std::ostringstream ss;
  write_report_csv(report, ss);
  return ss.str();
}

std::string report_json(const ConvergenceReport& report) {
  json j;
  j["axis"] = std::string(to_string(report.axis));
  j["fit_status"] = report.fit_status;
  if (report.fit) {
    j["fit"] = {{"intercept", report.fit->intercept},
                {"exponent", report.fit->exponent},
                {"points", report.fit->points},
                {"residual_norm", report.fit->residual_norm}};
  } else {
    j["fit"] = nullptr;
  }
  j["fit_rows"] = report.fit_rows;
  j["mc_floor"] = report.mc_floor;
  j["argmin"] = report.argmin ? json(*report.argmin) : json(nullptr);
  json rows = json::array();
  for (const auto& r : report.rows) rows.push_back(row_json(r));
  j["rows"] = std::move(rows);
  j["config"] = config_json(report.config);
  j["wall_seconds"] = report.wall_seconds;
  return j.dump(2);
}

void write_report(const ConvergenceReport& report, const std::filesystem::path& prefix) {
  const std::string csv = report_csv(report);
  const std::string js = report_json(report) + "\n";
  auto csv_path = prefix;
  csv_path += ".csv";
  auto json_path = prefix;
  json_path += ".json";
  write_file(csv_path, csv.data(), csv.size());
  write_file(json_path, js.data(), js.size());
}

std::vector<SlopePoint> read_report_points(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kBadConfig, "empty report");
  const auto header = split_csv_line(line);
  auto column = [&](const char* name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  };
  const auto cx = column("swept_value"), cy = column("w2"), cs = column("stable");
  if (cx < 0 || cy < 0) throw Error(ErrorCode::kBadConfig, "report lacks swept_value or w2 columns");
  std::vector<SlopePoint> points;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const auto need = static_cast<std::size_t>(std::max({cx, cy, cs})) + 1;
    if (cells.size() < need) throw Error(ErrorCode::kBadConfig, "short report row");
    if (cs >= 0 && cells[cs] == "0") continue;
    try {
      points.push_back({std::stod(cells[cx]), std::stod(cells[cy])});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kBadConfig, "unparsable report row '" + line + "'");
    }
  }
  return points;
}

}  // namespace dsb
