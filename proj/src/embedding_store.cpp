#include "cbm/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"

#include "cbm/error.hpp"
#include "cbm/rng.hpp"

namespace cbm {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, std::string(what) + " has non-finite entries");
}

/// Two-pass mean of the columns: a plain mean followed by one correction
/// pass over the residuals.
Vector column_mean(const Matrix& columns) {
  const double n = static_cast<double>(columns.cols());
  Vector mean = columns.rowwise().sum() / n;
  const Vector correction = (columns.colwise() - mean).rowwise().sum() / n;
  mean += correction;
  return mean;
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureMap::FeatureMap(Matrix data) : data_(std::move(data)) {
  if (data_.rows() < 1 || data_.cols() < 1)
    throw Error(ErrorKind::DimensionMismatch, "feature map needs c >= 1 and r >= 1");
  require_finite(data_, "feature map");
}

Vector gap(const FeatureMap& map) { return column_mean(map.data()); }

// ---------------------------------------------------------------------------

EmbeddingDataset::EmbeddingDataset(Eigen::Index dim, Role role, std::vector<ClassSamples> classes)
    : dim_(dim), role_(role), classes_(std::move(classes)) {
  if (dim_ < 1) throw Error(ErrorKind::DimensionMismatch, "dataset dimension must be positive");
  std::set<std::uint32_t> seen;
  for (const auto& cls : classes_) {
    if (!seen.insert(cls.class_id).second)
      throw Error(ErrorKind::DuplicateClass, "class id " + std::to_string(cls.class_id) + " repeated");
    if (cls.count() < 1)
      throw Error(ErrorKind::EmptyClass, "class " + std::to_string(cls.class_id) + " has no vectors");
    if (cls.vectors.rows() != dim_)
      throw Error(ErrorKind::DimensionMismatch,
                  "class " + std::to_string(cls.class_id) + " vectors have length " +
                      std::to_string(cls.vectors.rows()) + ", expected " + std::to_string(dim_));
    require_finite(cls.vectors, "embedding vector");
  }
}

Eigen::Index EmbeddingDataset::min_class_size() const noexcept {
  Eigen::Index smallest = 0;
  for (std::size_t i = 0; i < classes_.size(); ++i)
    smallest = i == 0 ? classes_[i].count() : std::min(smallest, classes_[i].count());
  return smallest;
}

std::pair<EmbeddingDataset, EmbeddingDataset> EmbeddingDataset::split_classes(
    std::size_t n_first) const {
  n_first = std::min(n_first, classes_.size());
  std::vector<ClassSamples> first(classes_.begin(), classes_.begin() + n_first);
  std::vector<ClassSamples> second(classes_.begin() + n_first, classes_.end());
  return {EmbeddingDataset(dim_, role_, std::move(first)),
          EmbeddingDataset(dim_, role_, std::move(second))};
}

bool operator==(const EmbeddingDataset& a, const EmbeddingDataset& b) {
  if (a.dim_ != b.dim_ || a.role_ != b.role_ || a.classes_.size() != b.classes_.size())
    return false;
  for (std::size_t i = 0; i < a.classes_.size(); ++i) {
    const auto& x = a.classes_[i];
    const auto& y = b.classes_[i];
    if (x.class_id != y.class_id || x.label != y.label || x.count() != y.count()) return false;
    if (!std::equal(x.vectors.data(), x.vectors.data() + x.vectors.size(), y.vectors.data()))
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

BaseMatrix::BaseMatrix(Matrix columns, std::vector<std::uint32_t> class_ids)
    : columns_(std::move(columns)), class_ids_(std::move(class_ids)) {
  if (columns_.cols() < 2)
    throw Error(ErrorKind::DimensionMismatch, "base matrix needs at least two classes");
  if (static_cast<std::size_t>(columns_.cols()) != class_ids_.size())
    throw Error(ErrorKind::DimensionMismatch, "base matrix ids do not match its columns");
  require_finite(columns_, "base matrix");
}

BaseMatrix build_base_matrix(const EmbeddingDataset& dataset) {
  if (dataset.role() != Role::Base)
    throw Error(ErrorKind::RoleMismatch, "base matrix requires a dataset with role=base");
  Matrix columns(dataset.dim(), static_cast<Eigen::Index>(dataset.class_count()));
  std::vector<std::uint32_t> ids;
  ids.reserve(dataset.class_count());
  for (std::size_t i = 0; i < dataset.class_count(); ++i) {
    const auto& cls = dataset.classes()[i];
    if (cls.count() == 0)
      throw Error(ErrorKind::EmptyClass, "class " + std::to_string(cls.class_id) + " is empty");
    columns.col(static_cast<Eigen::Index>(i)) = column_mean(cls.vectors);
    ids.push_back(cls.class_id);
  }
  return BaseMatrix(std::move(columns), std::move(ids));
}

// ---------------------------------------------------------------------------
// CBME

namespace {

constexpr std::array<unsigned char, 4> kMagic = {0x43, 0x42, 0x4D, 0x45};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      throw Error(ErrorKind::TruncatedFile, std::string("file ends inside ") + what);
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void save_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  std::string out;
  out.append(reinterpret_cast<const char*>(kMagic.data()), kMagic.size());
  put_u32(out, kCbmeVersion);
  put_u32(out, static_cast<std::uint32_t>(dataset.dim()));
  out.push_back(static_cast<char>(dataset.role()));
  put_u32(out, static_cast<std::uint32_t>(dataset.class_count()));
  for (const auto& cls : dataset.classes()) {
    put_u32(out, cls.class_id);
    put_u32(out, static_cast<std::uint32_t>(cls.count()));
    // Column-major storage is vector-by-vector, which is the file's row-major
    // n x c layout.
    const double* p = cls.vectors.data();
    for (Eigen::Index i = 0; i < cls.vectors.size(); ++i)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(p[i])));
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

EmbeddingDataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  Reader in(bytes);
  in.need(4, "magic");
  for (std::size_t i = 0; i < kMagic.size(); ++i)
    if (static_cast<unsigned char>(bytes[i]) != kMagic[i])
      throw Error(ErrorKind::BadMagic, path.string() + " is not a CBME file");
  for (int i = 0; i < 4; ++i) in.u8("magic");

  const auto version = in.u32("header");
  if (version != kCbmeVersion)
    throw Error(ErrorKind::UnsupportedVersion, "CBME version " + std::to_string(version));
  const auto dim = in.u32("header");
  if (dim == 0) throw Error(ErrorKind::DimensionMismatch, "CBME dimension is zero");
  const auto role_byte = in.u8("header");
  if (role_byte > 1) throw Error(ErrorKind::RoleMismatch, "unknown role byte " + std::to_string(role_byte));
  const auto n_classes = in.u32("header");

  std::vector<ClassSamples> classes;
  for (std::uint32_t c = 0; c < n_classes; ++c) {
    ClassSamples cls;
    cls.class_id = in.u32("class header");
    const auto n = in.u32("class header");
    const std::uint64_t payload = static_cast<std::uint64_t>(n) * dim * 4;
    if (payload > in.remaining())
      throw Error(ErrorKind::TruncatedFile, "class " + std::to_string(cls.class_id) + " declares " +
                                                std::to_string(n) + " vectors beyond end of file");
    cls.vectors.resize(dim, n);
    double* p = cls.vectors.data();
    for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(n) * dim; ++i)
      p[i] = static_cast<double>(in.f32("payload"));
    classes.push_back(std::move(cls));
  }
  if (in.remaining() != 0)
    throw Error(ErrorKind::DimensionMismatch,
                std::to_string(in.remaining()) + " trailing bytes after declared payload");
  return EmbeddingDataset(dim, static_cast<Role>(role_byte), std::move(classes));
}

std::filesystem::path labels_path_for(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".labels.json");
}

void save_labels(const EmbeddingDataset& dataset, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& cls : dataset.classes())
    if (cls.label) j[std::to_string(cls.class_id)] = *cls.label;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void load_labels(EmbeddingDataset& dataset, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::IoError, "bad label manifest " + path.string() + ": " + e.what());
  }
  std::vector<ClassSamples> classes = dataset.classes();
  for (auto& cls : classes) {
    const auto key = std::to_string(cls.class_id);
    if (j.contains(key) && j[key].is_string()) cls.label = j[key].get<std::string>();
  }
  dataset = EmbeddingDataset(dataset.dim(), dataset.role(), std::move(classes));
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

Matrix sample_centers(Rng& rng, std::size_t n, Eigen::Index latent, double scale) {
  Matrix centers(latent, static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < centers.cols(); ++j)
    for (Eigen::Index i = 0; i < latent; ++i) centers(i, j) = rng.uniform(-scale, scale);
  return centers;
}

std::vector<ClassSamples> sample_classes(Rng& rng, const Matrix& centers, std::uint32_t first_id,
                                         std::size_t per_class, double noise) {
  std::vector<ClassSamples> classes;
  classes.reserve(static_cast<std::size_t>(centers.cols()));
  for (Eigen::Index c = 0; c < centers.cols(); ++c) {
    ClassSamples cls;
    cls.class_id = first_id + static_cast<std::uint32_t>(c);
    cls.vectors.resize(centers.rows(), static_cast<Eigen::Index>(per_class));
    for (Eigen::Index s = 0; s < cls.vectors.cols(); ++s)
      for (Eigen::Index i = 0; i < centers.rows(); ++i)
        cls.vectors(i, s) = static_cast<float>(centers(i, c) + noise * rng.normal());
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace

std::pair<EmbeddingDataset, EmbeddingDataset> generate_synthetic(const SyntheticSpec& spec,
                                                                 std::uint64_t seed) {
  if (spec.dim < 1 || spec.base_classes < 2 || spec.novel_classes < 1 || spec.base_samples < 1 ||
      spec.novel_samples < 1)
    throw Error(ErrorKind::InvalidSpec, "dimension and counts must be positive (>= 2 base classes)");
  if (!(spec.center_scale > 0.0) || !(spec.base_noise >= 0.0) || !(spec.novel_noise >= 0.0))
    throw Error(ErrorKind::InvalidSpec, "center scale must be positive and noise scales nonnegative");
  if (spec.latent_dim < 0 || spec.latent_dim > spec.dim)
    throw Error(ErrorKind::InvalidSpec, "latent_dim must lie in [0, dim]");

  Rng centers_rng = Rng::stream(seed, 0);
  const Eigen::Index latent = spec.latent_dim == 0 ? spec.dim : spec.latent_dim;
  Matrix base_centers = sample_centers(centers_rng, spec.base_classes, latent, spec.center_scale);
  Matrix novel_centers = sample_centers(centers_rng, spec.novel_classes, latent, spec.center_scale);
  if (spec.latent_dim != 0) {
    Matrix gaussian(spec.dim, latent);
    for (Eigen::Index j = 0; j < latent; ++j)
      for (Eigen::Index i = 0; i < spec.dim; ++i) gaussian(i, j) = centers_rng.normal();
    const Matrix basis = Eigen::HouseholderQR<Matrix>(gaussian).householderQ() *
                         Matrix::Identity(spec.dim, latent);
    base_centers = basis * base_centers;
    novel_centers = basis * novel_centers;
  }
  // Centers are binary32 values so zero-noise samples equal them exactly.
  base_centers = base_centers.cast<float>().cast<double>();
  novel_centers = novel_centers.cast<float>().cast<double>();

  Rng base_rng = Rng::stream(seed, 1);
  Rng novel_rng = Rng::stream(seed, 2);
  auto base = sample_classes(base_rng, base_centers, 0, spec.base_samples, spec.base_noise);
  auto novel = sample_classes(novel_rng, novel_centers, static_cast<std::uint32_t>(spec.base_classes),
                              spec.novel_samples, spec.novel_noise);
  return {EmbeddingDataset(spec.dim, Role::Base, std::move(base)),
          EmbeddingDataset(spec.dim, Role::Novel, std::move(novel))};
}

}  // namespace cbm
