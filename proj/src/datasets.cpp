#include "mtiqa/datasets.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "mtiqa/errors.hpp"
#include "mtiqa/rng.hpp"

namespace mtiqa {

namespace {

constexpr std::size_t kDistBlur = 0;
constexpr std::size_t kDistColor = 1;
constexpr std::size_t kDistContrast = 2;
constexpr std::size_t kDistJpeg = 3;
constexpr std::size_t kDistJpeg2000 = 4;
constexpr std::size_t kDistNoise = 5;
constexpr std::size_t kDistOverExposure = 6;
constexpr std::size_t kDistQuantization = 7;
constexpr std::size_t kDistUnderExposure = 8;
constexpr std::size_t kDistLocalized = 9;
constexpr std::size_t kDistOthers = 10;

constexpr double kLuma = 0.45;

double round_to_step(double x, double step) { return std::nearbyint(x / step) * step; }

std::vector<double> box3(const std::vector<double>& x, std::size_t g, std::size_t ch) {
  std::vector<double> out(x.size(), 0.0);
  auto clamp = [g](std::ptrdiff_t i) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(g) - 1));
  };
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) {
      double* dst = &out[(r * g + c) * ch];
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const std::size_t rr = clamp(static_cast<std::ptrdiff_t>(r) + dr);
          const std::size_t cc = clamp(static_cast<std::ptrdiff_t>(c) + dc);
          const double* src = &x[(rr * g + cc) * ch];
          for (std::size_t k = 0; k < ch; ++k) dst[k] += src[k];
        }
      }
      for (std::size_t k = 0; k < ch; ++k) dst[k] /= 9.0;
    }
  }
  return out;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (num_datasets == 0) throw ConfigError("generator: num_datasets must be positive");
  if (references < 3) throw ConfigError("generator: need at least 3 references per dataset");
  if (versions == 0) throw ConfigError("generator: versions must be positive");
  if (grid < 2 || grid % 2 != 0) throw ConfigError("generator: grid must be even and >= 2");
  if (channels < 16) throw ConfigError("generator: channels must be >= 16");
  if (!(gamma > 0.0)) throw ConfigError("generator: gamma must be positive");
  if (sigma_obs < 0.0) throw ConfigError("generator: sigma_obs must be non-negative");
  if (!(min_severity > 0.0 && min_severity <= 1.0)) throw ConfigError("generator: min_severity must be in (0,1]");
  if (two_scene_prob < 0.0 || two_scene_prob > 1.0) throw ConfigError("generator: two_scene_prob must be in [0,1]");
  if (texture < 0.0 || offset < 0.0 || detail < 0.0) throw ConfigError("generator: amplitudes must be non-negative");
  if (scales.empty() || profiles.empty()) throw ConfigError("generator: scales and profiles must be non-empty");
  for (const auto& s : scales) {
    if (!(s.gain > 0.0)) throw ConfigError("generator: MOS gain must be positive (rank order must survive)");
  }
  for (const auto& p : profiles) {
    if (p.size() != 11) throw ConfigError("generator: each profile needs 11 distortion weights");
    double total = 0.0;
    for (double w : p) {
      if (w < 0.0) throw ConfigError("generator: negative profile weight");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("generator: profile weights sum to zero");
  }
}

std::string GeneratorConfig::describe() const {
  std::ostringstream os;
  auto num = [](double x) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, end);
  };
  os << "[generator]\n"
     << "num_datasets = " << num_datasets << "\n"
     << "references = " << references << "\n"
     << "versions = " << versions << "\n"
     << "grid = " << grid << "\n"
     << "channels = " << channels << "\n"
     << "gamma = " << num(gamma) << "\n"
     << "sigma_obs = " << num(sigma_obs) << "\n"
     << "min_severity = " << num(min_severity) << "\n"
     << "two_scene_prob = " << num(two_scene_prob) << "\n"
     << "texture = " << num(texture) << "\n"
     << "offset = " << num(offset) << "\n"
     << "detail = " << num(detail) << "\n"
     << "seed = " << seed << "\n";
  for (std::size_t m = 0; m < scales.size(); ++m) {
    os << "scale" << m << " = " << num(scales[m].gain) << " " << num(scales[m].offset) << "\n";
  }
  for (std::size_t m = 0; m < profiles.size(); ++m) {
    os << "profile" << m << " =";
    for (double w : profiles[m]) os << " " << num(w);
    os << "\n";
  }
  return os.str();
}

double latent_quality(double severity, double gamma) { return 1.0 + 4.0 * std::pow(1.0 - severity, gamma); }

GeneratorBasis make_basis(const GeneratorConfig& config, std::size_t num_scenes) {
  std::mt19937_64 rng(derive_seed({config.seed, 0xba515ULL, 0}));
  std::normal_distribution<double> normal;
  const std::size_t ch = config.channels;
  const std::size_t content_end = ch - 6;  // then two rotation partners, then four detail channels
  GeneratorBasis basis;
  const double content_norm = std::sqrt(1.0 - 2.0 * kLuma * kLuma);
  for (std::size_t s = 0; s < num_scenes; ++s) {
    std::vector<double> p(ch, 0.0);
    double ss = 0.0;
    for (std::size_t k = 2; k < content_end; ++k) {
      p[k] = normal(rng);
      ss += p[k] * p[k];
    }
    const double scale = content_norm / std::sqrt(ss);
    for (std::size_t k = 2; k < content_end; ++k) p[k] *= scale;
    p[0] = kLuma;
    p[1] = kLuma;
    basis.prototypes.push_back(std::move(p));
  }
  basis.occluder.resize(ch);
  double ss = 0.0;
  for (auto& x : basis.occluder) {
    x = normal(rng);
    ss += x * x;
  }
  for (auto& x : basis.occluder) x *= 2.0 / std::sqrt(ss);
  return basis;
}

void apply_distortion(std::vector<double>& x, std::size_t g, std::size_t ch, std::size_t d, double v,
                      const GeneratorBasis& basis, std::mt19937_64& rng) {
  if (v == 0.0 || d == kDistOthers) return;
  switch (d) {
    case kDistBlur: {
      // Blend toward one box pass, then toward two, so the effect keeps
      // growing across the whole severity range.
      const auto b1 = box3(x, g, ch);
      if (v < 0.5) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1.0 - v) * x[i] + v * b1[i];
      } else {
        const auto b2 = box3(b1, g, ch);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = (2.0 - 2.0 * v) * b1[i] + (2.0 * v - 1.0) * b2[i];
      }
      break;
    }
    case kDistColor: {
      // Rotate the two luma channels into otherwise empty partner channels.
      const double th = v * std::numbers::pi / 2.0;
      const double c = std::cos(th);
      const double s = std::sin(th);
      for (std::size_t p = 0; p < g * g; ++p) {
        double* px = &x[p * ch];
        for (std::size_t a = 0; a < 2; ++a) {
          const std::size_t b = ch - 6 + a;
          const double xa = px[a];
          const double xb = px[b];
          px[a] = c * xa - s * xb;
          px[b] = s * xa + c * xb;
        }
      }
      break;
    }
    case kDistContrast: {
      double m = 0.0;
      for (double e : x) m += e;
      m /= static_cast<double>(x.size());
      for (auto& e : x) e = m + (1.0 - 0.85 * v) * (e - m);
      break;
    }
    case kDistJpeg: {
      // 2x2 blocks: coarse DC rounding plus much coarser residual rounding.
      const double dc_step = 0.5 * v;
      const double ac_step = 2.0 * v;
      for (std::size_t br = 0; br < g; br += 2) {
        for (std::size_t bc = 0; bc < g; bc += 2) {
          for (std::size_t k = 0; k < ch; ++k) {
            double* e[4] = {&x[(br * g + bc) * ch + k], &x[(br * g + bc + 1) * ch + k],
                            &x[((br + 1) * g + bc) * ch + k], &x[((br + 1) * g + bc + 1) * ch + k]};
            const double mean = (*e[0] + *e[1] + *e[2] + *e[3]) / 4.0;
            const double q = round_to_step(mean, dc_step);
            for (auto* p : e) *p = q + round_to_step(*p - mean, ac_step);
          }
        }
      }
      break;
    }
    case kDistJpeg2000: {
      // One horizontal Haar level with the detail band quantized.
      const double step = 2.0 * v;
      for (std::size_t r = 0; r < g; ++r) {
        for (std::size_t c = 0; c < g; c += 2) {
          for (std::size_t k = 0; k < ch; ++k) {
            double& x0 = x[(r * g + c) * ch + k];
            double& x1 = x[(r * g + c + 1) * ch + k];
            const double a = (x0 + x1) / 2.0;
            const double h = round_to_step((x0 - x1) / 2.0, step);
            x0 = a + h;
            x1 = a - h;
          }
        }
      }
      break;
    }
    case kDistNoise: {
      std::normal_distribution<double> normal;
      for (auto& e : x) e += 0.6 * v * normal(rng);
      break;
    }
    case kDistOverExposure:
      for (auto& e : x) e += 0.8 * v;
      break;
    case kDistQuantization: {
      const double step = 1.2 * v;
      for (auto& e : x) e = round_to_step(e, step);
      break;
    }
    case kDistUnderExposure:
      for (auto& e : x) e -= 0.8 * v;
      break;
    case kDistLocalized: {
      std::uniform_int_distribution<int> coin(0, 1);
      const std::size_t qi = static_cast<std::size_t>(coin(rng));
      const std::size_t qj = static_cast<std::size_t>(coin(rng));
      const std::size_t h = g / 2;
      for (std::size_t r = qi * h; r < (qi + 1) * h; ++r) {
        for (std::size_t c = qj * h; c < (qj + 1) * h; ++c) {
          double* px = &x[(r * g + c) * ch];
          for (std::size_t k = 0; k < ch; ++k) px[k] = (1.0 - v) * px[k] + v * basis.occluder[k];
        }
      }
      break;
    }
    default:
      throw ConfigError("unknown distortion index " + std::to_string(d));
  }
}

std::vector<std::vector<ImageRecord>> generate(const GeneratorConfig& config, const LabelSpace& labels) {
  config.validate();
  if (labels.num_distortions() != 11 || labels.num_scenes() > 16) {
    throw ConfigError("generator expects 11 distortions and at most 16 scenes");
  }
  const std::size_t g = config.grid;
  const std::size_t ch = config.channels;
  const std::size_t cells = g * g * ch;
  const std::size_t num_scenes = labels.num_scenes();
  const GeneratorBasis basis = make_basis(config, num_scenes);

  std::vector<std::vector<ImageRecord>> out(config.num_datasets);
  for (std::size_t m = 0; m < config.num_datasets; ++m) {
    const MosScale scale = config.scales[m % config.scales.size()];
    const auto& profile = config.profiles[m % config.profiles.size()];
    for (std::size_t ref = 0; ref < config.references; ++ref) {
      std::mt19937_64 rng(derive_seed({config.seed, m + 1, ref}));
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> unif;

      std::vector<std::size_t> scenes;
      {
        std::uniform_int_distribution<std::size_t> pick(0, num_scenes - 1);
        scenes.push_back(pick(rng));
        if (unif(rng) < config.two_scene_prob) {
          std::size_t other = pick(rng);
          while (other == scenes[0]) other = pick(rng);
          scenes.push_back(other);
        }
      }
      const double w = scenes.size() == 2 ? 0.35 + 0.3 * unif(rng) : 1.0;

      std::vector<double> base(cells);
      std::vector<double> shift(ch);
      for (auto& s : shift) s = config.offset * normal(rng);
      for (std::size_t p = 0; p < g * g; ++p) {
        for (std::size_t k = 0; k < ch; ++k) {
          double mean = w * basis.prototypes[scenes[0]][k];
          if (scenes.size() == 2) mean += (1.0 - w) * basis.prototypes[scenes[1]][k];
          base[p * ch + k] = mean + config.texture * normal(rng) + shift[k];
        }
      }
      // Fine checkerboard texture on the last four channels; every
      // distortion attenuates it with severity, so it carries a shared
      // quality cue independent of distortion type.
      std::array<double, 4> dir{};
      double dn = 0.0;
      for (auto& e : dir) {
        e = normal(rng);
        dn += e * e;
      }
      for (auto& e : dir) e /= std::sqrt(dn);

      std::uint16_t mask = 0;
      for (auto s : scenes) mask = static_cast<std::uint16_t>(mask | (1u << s));

      std::discrete_distribution<std::size_t> pick_dist(profile.begin(), profile.end());
      for (std::size_t i = 0; i < config.versions; ++i) {
        const std::size_t d = pick_dist(rng);
        const double v = d == kDistOthers ? 0.0 : config.min_severity + (1.0 - config.min_severity) * unif(rng);
        std::vector<double> x = base;
        for (std::size_t r = 0; r < g; ++r) {
          for (std::size_t c = 0; c < g; ++c) {
            const double sign = ((r + c) % 2 == 0) ? 1.0 : -1.0;
            for (std::size_t k = 0; k < 4; ++k) {
              x[(r * g + c) * ch + ch - 4 + k] += (1.0 - v) * config.detail * sign * dir[k];
            }
          }
        }
        apply_distortion(x, g, ch, d, v, basis, rng);

        const double q = latent_quality(v, config.gamma);
        const double noisy = std::clamp(q + config.sigma_obs * normal(rng), 1.0, 5.0);

        ImageRecord rec;
        rec.id = static_cast<std::uint32_t>(ref * config.versions + i);
        rec.dataset_id = static_cast<std::uint32_t>(m);
        rec.reference_id = static_cast<std::uint32_t>(ref);
        rec.scene_mask = mask;
        rec.distortion = static_cast<std::uint8_t>(d);
        rec.severity = v;
        rec.mos = noisy * scale.gain + scale.offset;
        rec.features.height = g;
        rec.features.width = g;
        rec.features.channels = ch;
        rec.features.data.resize(cells);
        for (std::size_t k = 0; k < cells; ++k) {
          if (!std::isfinite(x[k])) throw NumericalError("generator produced a non-finite feature");
          rec.features.data[k] = static_cast<float>(x[k]);
        }
        out[m].push_back(std::move(rec));
      }
    }
  }
  return out;
}

// ---- on-disk format ---------------------------------------------------

namespace {

constexpr char kMagic[7] = {'M', 'T', 'I', 'Q', 'A', '1', '\0'};
constexpr std::size_t kHeaderBytes = 7 + 4 + 4 + 4 + 4 + 8;
constexpr std::size_t kRecordFixedBytes = 4 + 4 + 4 + 2 + 1 + 8 + 8;

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

template <class T>
T get(const std::string& buf, std::size_t& pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const DatasetFile& file) {
  std::string buf;
  buf.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, file.num_datasets);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(file.records.size()));
  put<std::uint32_t>(buf, file.grid);
  put<std::uint32_t>(buf, file.channels);
  put<std::uint64_t>(buf, file.label_hash);
  const std::size_t cells = static_cast<std::size_t>(file.grid) * file.grid * file.channels;
  for (const auto& r : file.records) {
    if (r.features.data.size() != cells || r.features.height != file.grid || r.features.width != file.grid) {
      throw DataError("record " + std::to_string(r.id) + " does not match the file's grid geometry");
    }
    put<std::uint32_t>(buf, r.id);
    put<std::uint32_t>(buf, r.dataset_id);
    put<std::uint32_t>(buf, r.reference_id);
    put<std::uint16_t>(buf, r.scene_mask);
    put<std::uint8_t>(buf, r.distortion);
    put<double>(buf, r.severity);
    put<double>(buf, r.mos);
    for (float f : r.features.data) put<float>(buf, f);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

DatasetFile read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file '" + path.string() + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderBytes || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("'" + path.string() + "' is not a dataset file (bad magic or short header)");
  }
  std::size_t pos = sizeof(kMagic);
  DatasetFile file;
  file.num_datasets = get<std::uint32_t>(buf, pos);
  const auto count = get<std::uint32_t>(buf, pos);
  file.grid = get<std::uint32_t>(buf, pos);
  file.channels = get<std::uint32_t>(buf, pos);
  file.label_hash = get<std::uint64_t>(buf, pos);
  if (file.grid == 0 || file.channels == 0) throw DataError("'" + path.string() + "': zero grid size or channels");
  const std::size_t cells = static_cast<std::size_t>(file.grid) * file.grid * file.channels;
  const std::size_t record_bytes = kRecordFixedBytes + 4 * cells;
  file.records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t start = pos;
    auto fail = [&](const std::string& what) {
      throw DataError("'" + path.string() + "': record " + std::to_string(i) + " at byte offset " +
                      std::to_string(start) + ": " + what);
    };
    if (buf.size() - pos < record_bytes) fail("truncated");
    ImageRecord r;
    r.id = get<std::uint32_t>(buf, pos);
    r.dataset_id = get<std::uint32_t>(buf, pos);
    r.reference_id = get<std::uint32_t>(buf, pos);
    r.scene_mask = get<std::uint16_t>(buf, pos);
    r.distortion = get<std::uint8_t>(buf, pos);
    r.severity = get<double>(buf, pos);
    r.mos = get<double>(buf, pos);
    if (r.scene_mask == 0) fail("empty scene set");
    if (r.distortion >= 11) fail("distortion index " + std::to_string(r.distortion) + " out of range");
    if (!std::isfinite(r.severity) || r.severity < 0.0 || r.severity > 1.0) fail("severity outside [0,1]");
    if (!std::isfinite(r.mos)) fail("non-finite mos");
    if (file.num_datasets > 0 && r.dataset_id >= file.num_datasets) fail("dataset id out of range");
    r.features.height = file.grid;
    r.features.width = file.grid;
    r.features.channels = file.channels;
    r.features.data.resize(cells);
    std::memcpy(r.features.data.data(), buf.data() + pos, 4 * cells);
    pos += 4 * cells;
    for (float f : r.features.data) {
      if (!std::isfinite(f)) fail("non-finite feature value");
    }
    file.records.push_back(std::move(r));
  }
  if (pos != buf.size()) {
    throw DataError("'" + path.string() + "': " + std::to_string(buf.size() - pos) +
                    " trailing bytes at byte offset " + std::to_string(pos));
  }
  return file;
}

// ---- splits and batching ----------------------------------------------

Split split(const std::vector<ImageRecord>& records, const SplitSpec& spec) {
  if (spec.train < 0 || spec.val < 0 || spec.test < 0 || std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::set<std::uint32_t> ids;
  for (const auto& r : records) ids.insert(r.reference_id);
  std::vector<std::uint32_t> groups(ids.begin(), ids.end());
  if (groups.size() < 3) {
    throw DataError("split needs at least 3 reference groups, got " + std::to_string(groups.size()));
  }
  std::mt19937_64 rng(spec.seed);
  std::shuffle(groups.begin(), groups.end(), rng);
  const double n = static_cast<double>(groups.size());
  auto n_train = static_cast<std::size_t>(std::llround(n * spec.train));
  auto n_val = static_cast<std::size_t>(std::llround(n * spec.val));
  n_train = std::clamp<std::size_t>(n_train, 1, groups.size() - 2);
  n_val = std::clamp<std::size_t>(n_val, spec.val > 0 ? 1 : 0, groups.size() - n_train - 1);

  std::map<std::uint32_t, int> role;
  for (std::size_t i = 0; i < groups.size(); ++i) role[groups[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  Split out;
  for (const auto& r : records) {
    switch (role[r.reference_id]) {
      case 0: out.train.push_back(r); break;
      case 1: out.val.push_back(r); break;
      default: out.test.push_back(r); break;
    }
  }
  return out;
}

BatchSampler::BatchSampler(std::vector<std::size_t> dataset_sizes, std::vector<std::size_t> batch_sizes,
                           std::uint64_t seed)
    : sizes_(std::move(dataset_sizes)), batch_(std::move(batch_sizes)), rng_(seed) {
  if (sizes_.size() != batch_.size() || sizes_.empty()) {
    throw ConfigError("batch sampler: need one batch size per dataset");
  }
  for (std::size_t m = 0; m < sizes_.size(); ++m) {
    if (sizes_[m] == 0) throw DataError("batch sampler: dataset " + std::to_string(m) + " is empty");
    if (batch_[m] == 0) throw ConfigError("batch sampler: batch size must be positive");
    if (batch_[m] > sizes_[m]) {
      throw ConfigError("batch sampler: batch size " + std::to_string(batch_[m]) + " exceeds dataset " +
                        std::to_string(m) + " size " + std::to_string(sizes_[m]));
    }
    std::vector<std::size_t> p(sizes_[m]);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = i;
    std::shuffle(p.begin(), p.end(), rng_);
    perm_.push_back(std::move(p));
    cursor_.push_back(0);
  }
}

std::vector<std::vector<std::size_t>> BatchSampler::next() {
  std::vector<std::vector<std::size_t>> out(sizes_.size());
  for (std::size_t m = 0; m < sizes_.size(); ++m) {
    if (cursor_[m] + batch_[m] > sizes_[m]) {
      std::shuffle(perm_[m].begin(), perm_[m].end(), rng_);
      cursor_[m] = 0;
    }
    out[m].assign(perm_[m].begin() + static_cast<std::ptrdiff_t>(cursor_[m]),
                  perm_[m].begin() + static_cast<std::ptrdiff_t>(cursor_[m] + batch_[m]));
    cursor_[m] += batch_[m];
  }
  return out;
}

std::size_t BatchSampler::iterations_per_epoch() const {
  std::size_t best = 0;
  for (std::size_t m = 0; m < sizes_.size(); ++m) best = std::max(best, (sizes_[m] + batch_[m] - 1) / batch_[m]);
  return best;
}

double pair_label(double mos_x, double mos_y) { return mos_x >= mos_y ? 1.0 : 0.0; }

double pair_label(const ImageRecord& x, const ImageRecord& y) {
  if (x.dataset_id != y.dataset_id) {
    throw DataError("pair_label: images " + std::to_string(x.id) + " and " + std::to_string(y.id) +
                    " come from different datasets (" + std::to_string(x.dataset_id) + " vs " +
                    std::to_string(y.dataset_id) + ")");
  }
  return pair_label(x.mos, y.mos);
}

std::vector<ImagePair> make_pairs(const std::vector<const ImageRecord*>& batch) {
  std::vector<ImagePair> pairs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t j = i + 1; j < batch.size(); ++j) {
      if (batch[i]->dataset_id != batch[j]->dataset_id) continue;
      pairs.push_back({i, j, pair_label(*batch[i], *batch[j])});
    }
  }
  return pairs;
}

}  // namespace mtiqa
