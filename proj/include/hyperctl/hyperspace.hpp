#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperctl {

/// Multi-index selecting one grid cell per dimension.
using ConfigIndex = std::vector<int>;

enum class Scale { linear, log10 };

inline const char* to_string(Scale s) { return s == Scale::linear ? "linear" : "log10"; }

inline Scale scale_from_string(const std::string& s) {
  if (s == "linear") return Scale::linear;
  if (s == "log10") return Scale::log10;
  throw std::invalid_argument("unknown scale '" + s + "' (expected 'linear' or 'log10')");
}

struct Dimension {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  Scale scale = Scale::linear;
};

/// The continuous box of hyperparameter values, one bounded interval per
/// dimension. log10 dimensions are discretized uniformly in the exponent.
struct HyperSpace {
  std::vector<Dimension> dims;

  int size() const { return static_cast<int>(dims.size()); }

  void validate() const {
    if (dims.empty()) throw std::invalid_argument("hyperparameter space needs at least one dimension");
    std::set<std::string> names;
    for (const auto& dim : dims) {
      if (dim.name.empty()) throw std::invalid_argument("dimension name must not be empty");
      if (!names.insert(dim.name).second) {
        throw std::invalid_argument("duplicate dimension name '" + dim.name + "'");
      }
      if (!(dim.lo < dim.hi)) {
        throw std::invalid_argument("dimension '" + dim.name + "': lo must be strictly below hi");
      }
      if (dim.scale == Scale::log10 && !(dim.lo > 0.0)) {
        throw std::invalid_argument("dimension '" + dim.name + "': log10 scale requires lo > 0");
      }
      if (!std::isfinite(dim.lo) || !std::isfinite(dim.hi)) {
        throw std::invalid_argument("dimension '" + dim.name + "': bounds must be finite");
      }
    }
  }
};

/// Uniform discretization of a HyperSpace: d ascending values per dimension,
/// equally spaced in the dimension's discretization coordinate (the raw value
/// for linear scale, the exponent for log10).
struct Grid {
  HyperSpace space;
  int points_per_dim = 0;                    // d
  std::vector<std::vector<double>> values;   // per dimension, ascending, size d
  std::vector<double> spacing;               // per dimension, in discretization coordinate

  int dims() const { return space.size(); }

  bool index_valid(const ConfigIndex& a) const {
    if (static_cast<int>(a.size()) != dims()) return false;
    for (int v : a) {
      if (v < 0 || v >= points_per_dim) return false;
    }
    return true;
  }
};

inline Grid build_grid(const HyperSpace& space, int points_per_dim) {
  space.validate();
  if (points_per_dim < 2) {
    throw std::invalid_argument("grid needs at least 2 points per dimension");
  }
  Grid grid;
  grid.space = space;
  grid.points_per_dim = points_per_dim;
  grid.values.reserve(space.dims.size());
  grid.spacing.reserve(space.dims.size());
  for (const auto& dim : space.dims) {
    const bool log_scale = dim.scale == Scale::log10;
    const double lo = log_scale ? std::log10(dim.lo) : dim.lo;
    const double hi = log_scale ? std::log10(dim.hi) : dim.hi;
    const double step = (hi - lo) / (points_per_dim - 1);
    std::vector<double> vals(points_per_dim);
    for (int k = 0; k < points_per_dim; ++k) {
      const double coord = lo + step * k;
      vals[k] = log_scale ? std::pow(10.0, coord) : coord;
    }
    // endpoints are the box bounds exactly, whatever roundoff did above
    vals.front() = dim.lo;
    vals.back() = dim.hi;
    grid.values.push_back(std::move(vals));
    grid.spacing.push_back(step);
  }
  return grid;
}

/// Concrete configuration values for a multi-index, one per dimension.
inline std::vector<double> index_to_config(const Grid& grid, const ConfigIndex& a) {
  if (!grid.index_valid(a)) throw std::out_of_range("configuration index out of range for grid");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = grid.values[i][a[i]];
  return out;
}

/// Inverse of index_to_config on grid points; off-grid values snap to the
/// nearest point in the discretization coordinate.
inline ConfigIndex config_to_index(const Grid& grid, const std::vector<double>& config) {
  if (static_cast<int>(config.size()) != grid.dims()) {
    throw std::invalid_argument("configuration has wrong number of dimensions");
  }
  ConfigIndex a(config.size());
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto& dim = grid.space.dims[i];
    const bool log_scale = dim.scale == Scale::log10;
    if (log_scale && !(config[i] > 0.0)) {
      throw std::invalid_argument("value for log10 dimension '" + dim.name + "' must be positive");
    }
    const double coord = log_scale ? std::log10(config[i]) : config[i];
    const double lo = log_scale ? std::log10(dim.lo) : dim.lo;
    const double pos = (coord - lo) / grid.spacing[i];
    int k = static_cast<int>(std::lround(pos));
    if (k < 0) k = 0;
    if (k >= grid.points_per_dim) k = grid.points_per_dim - 1;
    a[i] = k;
  }
  return a;
}

/// Flat component index of a multi-index, first dimension fastest:
/// flat = a[0] + d*a[1] + d^2*a[2] + ...
inline int flat_index(const ConfigIndex& a, int points_per_dim) {
  int flat = 0;
  for (std::size_t i = a.size(); i-- > 0;) {
    flat = flat * points_per_dim + a[i];
  }
  return flat;
}

inline ConfigIndex unflatten_index(int flat, int points_per_dim, int dims) {
  ConfigIndex a(dims);
  for (int i = 0; i < dims; ++i) {
    a[i] = flat % points_per_dim;
    flat /= points_per_dim;
  }
  return a;
}

}  // namespace hyperctl
