#include "spancl/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "spancl/common.hpp"

namespace spancl {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'S', 'P', 'A', 'N', 'C', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

ModelParams ModelParams::init(const EncoderConfig& config, std::uint64_t seed) {
  ModelParams p;
  p.config = config;
  p.encoder = EncoderParams::init(config, seed);
  p.head = SpanHeadParams::init(config.hidden, config.init_std, seed);
  p.classifier = AnswerabilityParams::zeros(config.hidden);
  return p;
}

ModelParams ModelParams::zeros(const EncoderConfig& config) {
  ModelParams p;
  p.config = config;
  p.encoder = EncoderParams::zeros(config);
  p.head = SpanHeadParams::zeros(config.hidden);
  p.classifier = AnswerabilityParams::zeros(config.hidden);
  return p;
}

std::vector<std::pair<std::string, Mat*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Mat*>> out;
  visit(*this, [&](const std::string& name, Mat& m) { out.emplace_back(name, &m); });
  return out;
}

std::vector<std::pair<std::string, const Mat*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Mat*>> out;
  visit(*this, [&](const std::string& name, const Mat& m) { out.emplace_back(name, &m); });
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& [name, m] : tensors()) flat.insert(flat.end(), m->data(), m->data() + m->size());
  return flat;
}

void ModelParams::unflatten(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw InputError("flat parameter vector has the wrong length");
  std::size_t off = 0;
  for (auto& [name, m] : tensors()) {
    std::memcpy(m->data(), flat.data() + off, static_cast<std::size_t>(m->size()) * sizeof(double));
    off += static_cast<std::size_t>(m->size());
  }
}

bool ModelParams::all_finite() const {
  for (const auto& [name, m] : tensors()) {
    if (!m->allFinite()) return false;
  }
  return true;
}

void save_checkpoint(const ModelParams& params, std::uint64_t vocab_hash, const nlohmann::json& metadata,
                     const std::string& path) {
  nlohmann::json header;
  header["format"] = "spancl-checkpoint";
  header["config"] = params.config.to_json();
  header["vocab_hash"] = std::to_string(vocab_hash);
  header["metadata"] = metadata;
  auto table = nlohmann::json::array();
  for (const auto& [name, m] : params.tensors()) table.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  header["tensors"] = table;
  const std::string hdr = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t hlen = hdr.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (const auto& [name, m] : params.tensors()) {
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (off + n > bytes.size()) throw ParseError("truncated checkpoint: " + path, off);
  };
  need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw ParseError("not a spancl checkpoint: " + path, 0);
  off += sizeof(kMagic);
  std::uint32_t version = 0;
  need(sizeof(version));
  std::memcpy(&version, bytes.data() + off, sizeof(version));
  off += sizeof(version);
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), off);
  std::uint64_t hlen = 0;
  need(sizeof(hlen));
  std::memcpy(&hlen, bytes.data() + off, sizeof(hlen));
  off += sizeof(hlen);
  need(hlen);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(off, hlen));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("bad checkpoint header: " + std::string(e.what()), off + e.byte);
  }
  off += hlen;

  Checkpoint ck;
  ck.params = ModelParams::zeros(EncoderConfig::from_json(header.at("config")));
  ck.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>());
  ck.metadata = header.value("metadata", nlohmann::json::object());
  const auto& table = header.at("tensors");
  auto tensors = ck.params.tensors();
  if (table.size() != tensors.size()) throw ValidationError("checkpoint tensor table does not match its config");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, m] = tensors[i];
    if (table[i].at("name") != name || table[i].at("rows") != m->rows() || table[i].at("cols") != m->cols()) {
      throw ValidationError("checkpoint tensor mismatch at " + name);
    }
    const std::size_t n = static_cast<std::size_t>(m->size()) * sizeof(double);
    need(n);
    std::memcpy(m->data(), bytes.data() + off, n);
    off += n;
  }
  if (off != bytes.size()) throw ParseError("trailing bytes in checkpoint: " + path, off);
  return ck;
}

GradCheckReport finite_difference_check(const LossAndGrad& loss_fn, const ModelParams& params,
                                        const GradCheckOptions& options) {
  ModelParams grads = params.zeros_like();
  const double base = loss_fn(params, grads);
  if (!std::isfinite(base)) throw Error("finite-difference check: loss is not finite");

  ModelParams probe = params;
  ModelParams scratch = params.zeros_like();
  auto probe_tensors = probe.tensors();
  const auto grad_tensors = std::as_const(grads).tensors();
  std::mt19937_64 rng(options.seed);

  GradCheckReport report;
  for (std::size_t k = 0; k < options.coordinates; ++k) {
    const std::size_t t = k % probe_tensors.size();
    Mat& m = *probe_tensors[t].second;
    if (m.size() == 0) continue;
    const auto idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(m.size()));
    const double orig = m.data()[idx];

    m.data()[idx] = orig + options.step;
    const double up = loss_fn(probe, scratch);
    m.data()[idx] = orig - options.step;
    const double down = loss_fn(probe, scratch);
    m.data()[idx] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) throw Error("finite-difference check: loss is not finite");

    const double numeric = (up - down) / (2 * options.step);
    const double analytic = grad_tensors[t].second->data()[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
    const double rel = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.worst_coordinate.empty()) {
      if (rel >= report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_coordinate = probe_tensors[t].first + "[" + std::to_string(idx) + "]";
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace spancl
