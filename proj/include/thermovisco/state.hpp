#pragma once

#include <stdexcept>
#include <vector>

namespace thermovisco {

/// Uniform cell-centered grid on (0, length). Node i sits at (i + 1/2) dx.
class Grid {
 public:
  static constexpr int kMinCells = 8;

  Grid() = default;
  Grid(double length, int n_cells) : length_(length), n_cells_(n_cells) {
    if (!(length > 0.0)) throw std::invalid_argument("grid length must be > 0");
    if (n_cells < kMinCells) throw std::invalid_argument("grid needs at least 8 cells");
  }

  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] int n_cells() const { return n_cells_; }
  [[nodiscard]] double dx() const { return length_ / n_cells_; }
  [[nodiscard]] double x(int i) const { return (i + 0.5) * dx(); }

 private:
  double length_ = 1.0;
  int n_cells_ = 64;
};

/// Grid samples of displacement u, v = u_t + a u, and temperature theta.
struct State {
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<double> theta;
};

}  // namespace thermovisco
