#include "trajmix/tensor/parameters.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "trajmix/core/errors.hpp"

namespace trajmix::tensor {

namespace {
constexpr const char* kMagic = "trajmix-checkpoint";
constexpr int kFormatVersion = 1;
}  // namespace

ParameterStore::ParameterStore(const ParameterStore& other)
    : entries_(other.entries_), gradients_ready_(other.gradients_ready_) {
  rebuild_index();
}

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this != &other) {
    entries_ = other.entries_;
    gradients_ready_ = other.gradients_ready_;
    rebuild_index();
  }
  return *this;
}

void ParameterStore::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) index_.emplace(entries_[i].name, i);
}

Tensor& ParameterStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw StateError("duplicate parameter '" + name + "'");
  Tensor grad(init.shape(), 0.0);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(init), std::move(grad)});
  return entries_.back().value;
}

Tensor& ParameterStore::add_uniform(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return add(std::move(name), std::move(t));
}

Tensor& ParameterStore::add_constant(std::string name, Shape shape, double value) {
  return add(std::move(name), Tensor(std::move(shape), value));
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

ParameterStore::Entry& ParameterStore::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw StateError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second];
}

const ParameterStore::Entry& ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw StateError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second];
}

const Tensor& ParameterStore::value(std::string_view name) const { return find(name).value; }
Tensor& ParameterStore::value(std::string_view name) { return find(name).value; }
const Tensor& ParameterStore::grad(std::string_view name) const { return find(name).grad; }
Tensor& ParameterStore::grad(std::string_view name) { return find(name).grad; }

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
  gradients_ready_ = false;
}

void ParameterStore::fill_values(double v) {
  for (auto& e : entries_) e.value.fill(v);
}

void ParameterStore::assign_values(const ParameterStore& other) {
  if (other.size() != size()) {
    throw DimensionError("checkpoint holds " + std::to_string(other.size()) +
                         " parameters, model expects " + std::to_string(size()));
  }
  for (auto& e : entries_) {
    const Entry& src = other.find(e.name);
    if (src.value.shape() != e.value.shape()) {
      throw DimensionError("parameter '" + e.name + "' has shape " +
                           shape_string(src.value.shape()) + ", expected " +
                           shape_string(e.value.shape()));
    }
    e.value = src.value;
  }
}

void ParameterStore::save(std::ostream& os) const {
  os << kMagic << ' ' << kFormatVersion << '\n';
  os << entries_.size() << '\n';
  char buf[40];
  for (const auto& e : entries_) {
    os << e.name << ' ' << e.value.rank();
    for (auto d : e.value.shape()) os << ' ' << d;
    os << '\n';
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.value[i]);
      os << (i ? " " : "") << buf;
    }
    os << '\n';
  }
}

ParameterStore ParameterStore::load(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic) {
    throw DomainError("not a trajmix checkpoint");
  }
  if (version != kFormatVersion) {
    throw DomainError("unsupported checkpoint version " + std::to_string(version));
  }
  std::size_t count = 0;
  if (!(is >> count)) throw DomainError("truncated checkpoint header");
  ParameterStore store;
  for (std::size_t n = 0; n < count; ++n) {
    std::string name;
    std::size_t rank = 0;
    if (!(is >> name >> rank) || rank == 0) throw DomainError("malformed checkpoint entry");
    Shape shape(rank);
    for (auto& d : shape) {
      if (!(is >> d)) throw DomainError("malformed shape for '" + name + "'");
    }
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) {
      std::string token;
      if (!(is >> token)) throw DomainError("truncated values for '" + name + "'");
      v = std::strtod(token.c_str(), nullptr);
    }
    store.add(name, Tensor(std::move(shape), std::move(values)));
  }
  return store;
}

void ParameterStore::save_file(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  save(os);
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

ParameterStore ParameterStore::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return load(is);
}

}  // namespace trajmix::tensor
