#include "pkw/model_io.hpp"

#include <fstream>
#include <iterator>
#include <ostream>

#include "pkw/bytes.hpp"
#include "pkw/error.hpp"

namespace pkw {

namespace {

constexpr std::uint32_t kModelVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { bytes::put_le(buf, v); }
  void i32(std::int32_t v) { bytes::put_le(buf, v); }
  void u64(std::uint64_t v) { bytes::put_le(buf, v); }
  void f64(double v) { bytes::put_le(buf, v); }

  void tree(const RegressionTree& t) {
    i32(t.params.max_depth);
    u64(t.params.min_samples_leaf);
    u64(t.params.min_samples_split);
    u64(t.params.max_features);
    u64(t.n_features);
    u64(t.nodes.size());
    for (const auto& n : t.nodes) {
      i32(n.feature);
      f64(n.threshold);
      i32(n.left);
      i32(n.right);
      f64(n.value);
    }
  }

  std::string buf;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint32_t u32() { return take<std::uint32_t>(); }
  std::int32_t i32() { return take<std::int32_t>(); }
  std::uint64_t u64() { return take<std::uint64_t>(); }
  double f64() { return take<double>(); }
  bool at_end() const { return pos_ == data_.size(); }

  // Element counts are checked against the remaining payload before any
  // allocation so a corrupt count cannot trigger a huge reserve.
  std::size_t count(std::size_t bytes_each) {
    const auto n = u64();
    if (n > (data_.size() - pos_) / bytes_each) fail("count exceeds payload");
    return static_cast<std::size_t>(n);
  }

  RegressionTree tree() {
    RegressionTree t;
    t.params.max_depth = i32();
    t.params.min_samples_leaf = u64();
    t.params.min_samples_split = u64();
    t.params.max_features = u64();
    t.n_features = u64();
    t.nodes.resize(count(24));
    for (auto& n : t.nodes) {
      n.feature = i32();
      n.threshold = f64();
      n.left = i32();
      n.right = i32();
      n.value = f64();
    }
    validate(t);
    return t;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::MalformedModel, what + " at byte " + std::to_string(pos_));
  }

 private:
  template <typename T>
  T take() {
    if (data_.size() - pos_ < sizeof(T)) fail("truncated model");
    const T v = bytes::get_le<T>(reinterpret_cast<const unsigned char*>(data_.data()) + pos_);
    pos_ += sizeof(T);
    return v;
  }

  // Children must point forward so prediction always terminates.
  void validate(const RegressionTree& t) const {
    if (t.nodes.empty()) fail("tree without nodes");
    const auto n = static_cast<std::int32_t>(t.nodes.size());
    for (std::int32_t i = 0; i < n; ++i) {
      const auto& node = t.nodes[static_cast<std::size_t>(i)];
      if (node.feature < 0) continue;
      if (static_cast<std::size_t>(node.feature) >= t.n_features || node.left <= i || node.right <= i ||
          node.left >= n || node.right >= n) {
        fail("inconsistent tree node " + std::to_string(i));
      }
    }
  }

  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

ModelKind kind_of(const AnyModel& model) {
  return static_cast<ModelKind>(model.index() + 1);
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Tree: return "tree";
    case ModelKind::Forest: return "forest";
    case ModelKind::Gbm: return "gbm";
    case ModelKind::PointNet: return "pointnet";
  }
  return "tree";
}

void write_model(std::ostream& out, const AnyModel& model) {
  Writer w;
  w.buf = "WNSM";
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(kind_of(model)));
  if (const auto* t = std::get_if<RegressionTree>(&model)) {
    w.tree(*t);
  } else if (const auto* f = std::get_if<ForestModel>(&model)) {
    w.u64(f->trees.size());
    for (const auto& t : f->trees) w.tree(t);
  } else if (const auto* g = std::get_if<BoostedModel>(&model)) {
    w.f64(g->initial);
    w.f64(g->learning_rate);
    w.u64(g->trees.size());
    for (const auto& t : g->trees) w.tree(t);
  } else {
    const auto& net = std::get<PointNetMini>(model);
    w.u64(net.params.size());
    for (double p : net.params) w.f64(p);
  }
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing model stream");
}

void write_model(const std::filesystem::path& path, const AnyModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string());
  write_model(out, model);
}

AnyModel read_model(std::istream& in) {
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 12 || data.compare(0, 4, "WNSM") != 0) {
    throw Error(ErrorCode::MalformedModel, "missing WNSM header");
  }
  Reader r(data.substr(4));
  if (const auto version = r.u32(); version != kModelVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  AnyModel model;
  switch (r.u32()) {
    case static_cast<std::uint32_t>(ModelKind::Tree):
      model = r.tree();
      break;
    case static_cast<std::uint32_t>(ModelKind::Forest): {
      ForestModel f;
      f.trees.resize(r.count(48));
      for (auto& t : f.trees) t = r.tree();
      model = std::move(f);
      break;
    }
    case static_cast<std::uint32_t>(ModelKind::Gbm): {
      BoostedModel g;
      g.initial = r.f64();
      g.learning_rate = r.f64();
      g.trees.resize(r.count(48));
      for (auto& t : g.trees) t = r.tree();
      model = std::move(g);
      break;
    }
    case static_cast<std::uint32_t>(ModelKind::PointNet): {
      PointNetMini net;
      if (r.u64() != PointNetMini::kParameterCount) r.fail("parameter count mismatch");
      for (auto& p : net.params) p = r.f64();
      model = std::move(net);
      break;
    }
    default:
      r.fail("unknown model kind");
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return model;
}

AnyModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_model(in);
}

}  // namespace pkw
