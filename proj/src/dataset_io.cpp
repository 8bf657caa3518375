#include <fstream>
#include <sstream>

#include "sedloss/data.hpp"
#include "sedloss/keyvalue.hpp"

namespace sedloss {

namespace {

constexpr const char* kFormat = "sedloss-dataset-1";

std::string clip_file(std::size_t i) { return "clip_" + std::to_string(i) + ".csv"; }

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError("manifest is missing '" + key + "'");
  return it->second;
}

std::size_t require_count(const std::map<std::string, std::string>& kv, const std::string& key) {
  const long long v = parse_int(require(kv, key), key);
  if (v < 0) throw ValidationError("manifest '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  const auto& spec = ds.spec;
  const std::size_t frames = ds.clips.empty() ? spec.frames_per_clip() : ds.clips[0].labels.frames();
  const auto stats = compute_stats(ds);

  std::ofstream mf(dir / "manifest");
  if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest").string());
  mf << "# synthetic sound event dataset\n";
  mf << "format=" << kFormat << "\n";
  mf << "clips=" << ds.clips.size() << "\n";
  mf << "frames_per_clip=" << frames << "\n";
  mf << "feature_dim=" << spec.feature_dim << "\n";
  mf << "num_classes=" << spec.num_classes() << "\n";
  mf << "clip_length_s=" << format_double(spec.clip_length_s) << "\n";
  mf << "frame_hop_s=" << format_double(spec.frame_hop_s) << "\n";
  mf << "frame_len_s=" << format_double(spec.frame_len_s) << "\n";
  mf << "noise_sigma=" << format_double(spec.noise_sigma) << "\n";
  mf << "seed=" << spec.seed << "\n";
  for (std::size_t m = 0; m < spec.num_classes(); ++m) {
    const auto& c = spec.classes[m];
    const std::string p = "class." + std::to_string(m) + ".";
    mf << p << "name=" << c.name << "\n";
    mf << p << "mean_duration_s=" << format_double(c.mean_duration_s) << "\n";
    mf << p << "rate_per_clip=" << format_double(c.rate_per_clip) << "\n";
    mf << p << "amplitude=" << format_double(c.amplitude) << "\n";
    mf << p << "signature=" << join_doubles(c.signature) << "\n";
  }
  mf << "total_active=" << stats.total_active << "\n";
  mf << "total_inactive=" << stats.total_inactive << "\n";
  if (!mf) throw std::runtime_error("failed writing manifest");

  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const auto& clip = ds.clips[i];
    std::ofstream os(dir / clip_file(i));
    if (!os) throw std::runtime_error("cannot write " + (dir / clip_file(i)).string());
    os << "frame";
    for (std::size_t d = 0; d < clip.features.cols(); ++d) os << ",f" << d;
    for (std::size_t m = 0; m < clip.labels.classes(); ++m) os << ",z" << m;
    os << "\n";
    for (std::size_t n = 0; n < clip.features.rows(); ++n) {
      os << n;
      for (double v : clip.features.row(n)) os << ',' << format_double(v);
      for (std::size_t m = 0; m < clip.labels.classes(); ++m) {
        os << ',' << (clip.labels.active(n, m) ? '1' : '0');
      }
      os << "\n";
    }
    if (!os) throw std::runtime_error("failed writing " + clip_file(i));
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_regular_file(dir / "manifest")) {
    throw ValidationError("no dataset manifest in " + dir.string());
  }
  const auto kv = to_map(read_key_value_file((dir / "manifest").string()));
  if (require(kv, "format") != kFormat) {
    throw ValidationError("unsupported dataset format '" + require(kv, "format") + "'");
  }
  Dataset ds;
  auto& spec = ds.spec;
  spec.clips = require_count(kv, "clips");
  const std::size_t frames = require_count(kv, "frames_per_clip");
  spec.feature_dim = require_count(kv, "feature_dim");
  const std::size_t nclass = require_count(kv, "num_classes");
  spec.clip_length_s = parse_double(require(kv, "clip_length_s"), "clip_length_s");
  spec.frame_hop_s = parse_double(require(kv, "frame_hop_s"), "frame_hop_s");
  spec.frame_len_s = parse_double(require(kv, "frame_len_s"), "frame_len_s");
  spec.noise_sigma = parse_double(require(kv, "noise_sigma"), "noise_sigma");
  spec.seed = static_cast<std::uint64_t>(parse_int(require(kv, "seed"), "seed"));
  for (std::size_t m = 0; m < nclass; ++m) {
    const std::string p = "class." + std::to_string(m) + ".";
    EventClassSpec c;
    c.name = require(kv, p + "name");
    c.mean_duration_s = parse_double(require(kv, p + "mean_duration_s"), p + "mean_duration_s");
    c.rate_per_clip = parse_double(require(kv, p + "rate_per_clip"), p + "rate_per_clip");
    c.amplitude = parse_double(require(kv, p + "amplitude"), p + "amplitude");
    c.signature = parse_double_list(require(kv, p + "signature"), p + "signature");
    spec.classes.push_back(std::move(c));
  }
  validate(spec);
  if (frames != spec.frames_per_clip()) {
    throw ValidationError("frames_per_clip disagrees with clip length and hop");
  }

  const std::size_t dim = spec.feature_dim;
  const std::size_t columns = 1 + dim + nclass;
  std::string expected_header = "frame";
  for (std::size_t d = 0; d < dim; ++d) expected_header += ",f" + std::to_string(d);
  for (std::size_t m = 0; m < nclass; ++m) expected_header += ",z" + std::to_string(m);

  ds.clips.reserve(spec.clips);
  for (std::size_t i = 0; i < spec.clips; ++i) {
    const auto path = dir / clip_file(i);
    std::ifstream is(path);
    if (!is) throw ValidationError("missing clip file " + path.string());
    std::string line;
    if (!std::getline(is, line) || trim(line) != expected_header) {
      throw ValidationError(path.string() + ": unexpected header");
    }
    Clip clip{FeatureGrid(frames, dim), LabelGrid(frames, nclass)};
    std::size_t n = 0;
    while (std::getline(is, line)) {
      if (trim(line).empty()) continue;
      if (n >= frames) throw ValidationError(path.string() + ": too many rows");
      const auto cells = split(trim(line), ',');
      if (cells.size() != columns) {
        throw ValidationError(path.string() + ": row " + std::to_string(n) + " has " +
                              std::to_string(cells.size()) + " columns, expected " +
                              std::to_string(columns));
      }
      if (parse_int(cells[0], "frame") != static_cast<long long>(n)) {
        throw ValidationError(path.string() + ": frame index out of sequence");
      }
      for (std::size_t d = 0; d < dim; ++d) {
        clip.features(n, d) = parse_double(cells[1 + d], "feature");
      }
      for (std::size_t m = 0; m < nclass; ++m) {
        const auto& cell = cells[1 + dim + m];
        if (cell != "0" && cell != "1") {
          throw ValidationError(path.string() + ": label must be 0 or 1, got '" + cell + "'");
        }
        clip.labels.set(n, m, cell == "1");
      }
      ++n;
    }
    if (n != frames) {
      throw ValidationError(path.string() + ": expected " + std::to_string(frames) +
                            " rows, found " + std::to_string(n));
    }
    ds.clips.push_back(std::move(clip));
  }
  return ds;
}

}  // namespace sedloss
