#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace decaylab {

/// Volume of the unit ball in R^N.
double unit_ball_volume(int dimension);

/// Uniform spacing on [0, inner_radius], geometric growth of the spacing beyond.
struct GridSpacing {
  double inner_spacing = 0.02;
  double inner_radius = 10.0;
  double ratio = 1.02;
};

/// Radial nodes 0 = r_0 < r_1 < ... < r_M = R_max in dimension N >= 1.
class RadialGrid {
 public:
  static std::shared_ptr<const RadialGrid> from_nodes(int dimension, std::vector<double> nodes);
  /// Solver grid; the last node is the first generated node >= r_max, so the
  /// geometric ratio invariant also holds for the last cell.
  static std::shared_ptr<const RadialGrid> make(int dimension, const GridSpacing& spacing, double r_max);

  int dimension() const { return dimension_; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t cells() const { return nodes_.size() - 1; }
  double r(std::size_t i) const { return nodes_[i]; }
  double r_max() const { return nodes_.back(); }
  std::span<const double> nodes() const { return nodes_; }
  const std::optional<GridSpacing>& spacing() const { return spacing_; }
  double ball_volume() const { return ball_volume_; }
  /// Index of the cell [r_i, r_{i+1}) containing r; cells()-1 for r = R_max.
  std::size_t locate(double r) const;
  /// Index of a node equal to r up to a relative 1e-12, if any.
  std::optional<std::size_t> find_node(double r) const;
  /// New grid with extra nodes inserted (those equal to existing nodes are skipped).
  std::shared_ptr<const RadialGrid> with_breakpoints(std::span<const double> extra) const;

 private:
  RadialGrid(int dimension, std::vector<double> nodes, std::optional<GridSpacing> spacing);

  int dimension_;
  std::vector<double> nodes_;
  std::optional<GridSpacing> spacing_;
  double ball_volume_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Radially symmetric function, linear on every grid cell and zero beyond
/// R_max. Each cell keeps its own one-sided endpoint values, so jumps are
/// allowed exactly at nodes; the usual nodal construction is continuous.
class RadialFunction {
 public:
  RadialFunction() = default;
  static RadialFunction from_nodal(GridPtr grid, std::vector<double> values);
  static RadialFunction from_cells(GridPtr grid, std::vector<double> left, std::vector<double> right);
  /// Continuous nodal sampling of f.
  static RadialFunction sample(GridPtr grid, const std::function<double(double)>& f);
  /// Cell-wise sampling with one-sided limits f(r_i^+), f(r_{i+1}^-) taken by
  /// evaluating just inside each cell; exact for functions that are linear
  /// on cells with jumps at nodes (indicators, truncations).
  static RadialFunction sample_cells(GridPtr grid, const std::function<double(double)>& f);
  /// value * χ_{a ≤ |x| < b}; a and b must be grid nodes (b may be +inf).
  static RadialFunction indicator(GridPtr grid, double a, double b, double value = 1.0);

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t cells() const { return left_.size(); }
  double left(std::size_t cell) const { return left_[cell]; }
  double right(std::size_t cell) const { return right_[cell]; }
  std::span<const double> left_values() const { return left_; }
  std::span<const double> right_values() const { return right_; }

  /// Right-continuous evaluation; 0 for r >= R_max.
  double operator()(double r) const;
  bool is_continuous() const;
  /// Node values (requires continuity); value count equals node count.
  std::vector<double> nodal_values() const;
  double max_abs() const;
  /// |f| non-increasing in r and f >= 0, so f♯ = f.
  bool is_nonincreasing_nonnegative() const;
  bool all_finite() const;

  RadialFunction abs() const;
  RadialFunction scaled(double factor) const;
  /// f restricted to a ≤ r < b (zero elsewhere); a and b are inserted as nodes.
  RadialFunction restricted(double a, double b) const;
  /// f(r / lambda) sampled on the grid scaled by lambda.
  RadialFunction dilated(double lambda) const;
  /// Pointwise sum on the union of both grids (same dimension).
  friend RadialFunction operator+(const RadialFunction& f, const RadialFunction& g);

 private:
  RadialFunction(GridPtr grid, std::vector<double> left, std::vector<double> right);

  GridPtr grid_;
  std::vector<double> left_;
  std::vector<double> right_;
};

}  // namespace decaylab
