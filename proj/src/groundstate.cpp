#include "optomech/groundstate.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "optomech/error.hpp"
#include "optomech/meanfield.hpp"

namespace optomech {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

/// Real-to-complex transform pair on a fixed 1-D or 2-D shape.
class SpectralKinetic {
 public:
  SpectralKinetic(const std::vector<GridAxis>& axes, double omega_m) {
    for (const auto& a : axes) shape_.push_back(a.n_points);
    real_size_ = 1;
    for (int n : shape_) real_size_ *= n;
    const int last = shape_.back();
    complex_size_ = real_size_ / last * (last / 2 + 1);
    real_.reset(fftw_alloc_real(static_cast<std::size_t>(real_size_)));
    spec_.reset(fftw_alloc_complex(static_cast<std::size_t>(complex_size_)));
    {
      std::lock_guard<std::mutex> lock(planner_mutex());
      forward_ = fftw_plan_dft_r2c(static_cast<int>(shape_.size()), shape_.data(), real_.get(), spec_.get(),
                                   FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r(static_cast<int>(shape_.size()), shape_.data(), spec_.get(), real_.get(),
                                    FFTW_ESTIMATE);
    }
    // T(k) = (omega_m/2) |k|^2 on the half spectrum.
    kinetic_.resize(static_cast<std::size_t>(complex_size_));
    auto wavenumber = [&](int axis, int j) {
      const int n = axes[static_cast<std::size_t>(axis)].n_points;
      const double l = n * axes[static_cast<std::size_t>(axis)].spacing();
      const int m = j <= n / 2 ? j : j - n;
      return 2.0 * std::numbers::pi * m / l;
    };
    if (shape_.size() == 1) {
      for (int j = 0; j <= last / 2; ++j) {
        const double k = wavenumber(0, j);
        kinetic_[static_cast<std::size_t>(j)] = 0.5 * omega_m * k * k;
      }
    } else {
      const int half = last / 2 + 1;
      for (int i = 0; i < shape_[0]; ++i) {
        const double k1 = wavenumber(0, i);
        for (int j = 0; j < half; ++j) {
          const double k2 = wavenumber(1, j);
          kinetic_[static_cast<std::size_t>(i * half + j)] = 0.5 * omega_m * (k1 * k1 + k2 * k2);
        }
      }
    }
  }
  ~SpectralKinetic() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  SpectralKinetic(const SpectralKinetic&) = delete;
  SpectralKinetic& operator=(const SpectralKinetic&) = delete;

  /// out = f(T) applied spectrally to in, where f is given per mode.
  void apply(const Eigen::VectorXd& in, Eigen::VectorXd& out, const std::vector<double>& multiplier) {
    std::copy(in.data(), in.data() + real_size_, real_.get());
    fftw_execute(forward_);
    const double scale = 1.0 / static_cast<double>(real_size_);
    for (Index k = 0; k < complex_size_; ++k) {
      const double f = multiplier[static_cast<std::size_t>(k)] * scale;
      spec_.get()[k][0] *= f;
      spec_.get()[k][1] *= f;
    }
    fftw_execute(backward_);
    out.resize(real_size_);
    std::copy(real_.get(), real_.get() + real_size_, out.data());
  }

  const std::vector<double>& kinetic() const { return kinetic_; }

 private:
  std::vector<int> shape_;
  Index real_size_ = 0;
  Index complex_size_ = 0;
  std::unique_ptr<double, FftwDeleter> real_;
  std::unique_ptr<fftw_complex, FftwDeleter> spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<double> kinetic_;
};

using IndexMap = std::vector<Index>;

/// Grid permutations induced by reflections and (2-D) coordinate exchange.
std::vector<IndexMap> candidate_symmetries(const std::vector<GridAxis>& axes) {
  std::vector<IndexMap> out;
  auto reflectable = [](const GridAxis& a) { return std::abs(a.x_min + a.x_max) < 1e-12 * (a.x_max - a.x_min); };
  if (axes.size() == 1) {
    const int n = axes[0].n_points;
    if (reflectable(axes[0])) {
      IndexMap m(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = (n - i) % n;
      out.push_back(std::move(m));
    }
    return out;
  }
  const int n1 = axes[0].n_points;
  const int n2 = axes[1].n_points;
  const bool same = n1 == n2 && axes[0].x_min == axes[1].x_min && axes[0].x_max == axes[1].x_max;
  for (int swap = 0; swap <= (same ? 1 : 0); ++swap) {
    for (int r1 = 0; r1 <= (reflectable(axes[0]) ? 1 : 0); ++r1) {
      for (int r2 = 0; r2 <= (reflectable(axes[1]) ? 1 : 0); ++r2) {
        if (!swap && !r1 && !r2) continue;
        IndexMap m(static_cast<std::size_t>(n1 * n2));
        for (int i = 0; i < n1; ++i) {
          for (int j = 0; j < n2; ++j) {
            int a = r1 ? (n1 - i) % n1 : i;
            int b = r2 ? (n2 - j) % n2 : j;
            if (swap) std::swap(a, b);
            m[static_cast<std::size_t>(i * n2 + j)] = static_cast<Index>(a) * n2 + b;
          }
        }
        out.push_back(std::move(m));
      }
    }
  }
  return out;
}

void symmetrize(Eigen::VectorXd& psi, const std::vector<IndexMap>& group) {
  if (group.empty()) return;
  Eigen::VectorXd acc = psi;
  for (const auto& m : group)
    for (Index i = 0; i < psi.size(); ++i) acc(i) += psi(m[static_cast<std::size_t>(i)]);
  psi = acc / static_cast<double>(group.size() + 1);
}

double boundary_probability(const PositionGrid& g) {
  const double dv = g.cell_volume();
  double p = 0.0;
  if (g.dims() == 1) {
    const Index n = g.values.size();
    p = (g.values(0) * g.values(0) + g.values(n - 1) * g.values(n - 1)) * dv;
    return p;
  }
  const int n1 = g.axes[0].n_points;
  const int n2 = g.axes[1].n_points;
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      if (i == 0 || j == 0 || i == n1 - 1 || j == n2 - 1) {
        const double v = g.values(static_cast<Index>(i) * n2 + j);
        p += v * v * dv;
      }
    }
  }
  return p;
}

void check_grid(const SystemParams& params, const PositionGrid& grid, double margin) {
  if (grid.dims() < 1 || grid.dims() > 2) throw DomainError("ground-state grids have one or two coordinates");
  if (grid.dims() != params.n_mech()) {
    throw ShapeError("grid has " + std::to_string(grid.dims()) + " axes but the model has " +
                     std::to_string(params.n_mech()) + " mechanical modes");
  }
  for (const auto& a : grid.axes) {
    if (!(a.x_max > a.x_min) || a.n_points < 8) throw DomainError("grid axes need x_max > x_min and >= 8 points");
  }
  const auto minima =
      params.coupling == Coupling::Linear ? linear_steady_states(params) : quadratic_steady_states(params);
  for (const auto& s : minima) {
    if (s.stability != Stability::Stable) continue;
    for (std::size_t k = 0; k < s.x_s.size(); ++k) {
      const GridAxis& a = grid.axes[k];
      if (s.x_s[k] < a.x_min + margin || s.x_s[k] > a.x_max - margin) {
        std::ostringstream msg;
        msg << "grid axis " << k << " [" << a.x_min << ", " << a.x_max << "] does not cover the classical minimum at "
            << s.x_s[k] << " with margin " << margin;
        throw DomainError(msg.str());
      }
    }
  }
}

}  // namespace

std::vector<double> GridAxis::points() const {
  std::vector<double> x(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) x[static_cast<std::size_t>(i)] = at(i);
  return x;
}

Index PositionGrid::size() const {
  Index n = 1;
  for (const auto& a : axes) n *= a.n_points;
  return n;
}

double PositionGrid::cell_volume() const {
  double v = 1.0;
  for (const auto& a : axes) v *= a.spacing();
  return v;
}

double PositionGrid::norm_squared() const { return values.squaredNorm() * cell_volume(); }

PositionGrid default_grid(int n_coordinates) {
  PositionGrid g;
  if (n_coordinates == 1) {
    g.axes = {GridAxis{-12.0, 12.0, 512}};
  } else if (n_coordinates == 2) {
    g.axes = {GridAxis{-8.0, 8.0, 256}, GridAxis{-8.0, 8.0, 256}};
  } else {
    throw DomainError("ground-state grids have one or two coordinates");
  }
  g.values = Eigen::VectorXd::Zero(g.size());
  return g;
}

GroundStateResult solve_ground_state(const SystemParams& params, const PositionGrid& grid,
                                     const GroundStateOptions& options) {
  params.validate();
  check_grid(params, grid, options.margin);
  const Index n = grid.size();
  const double dv = grid.cell_volume();
  const double w = params.omega_m;

  Eigen::VectorXd v(n);
  Eigen::VectorXd psi(n);
  {
    std::vector<double> x(grid.axes.size());
    for (Index idx = 0; idx < n; ++idx) {
      if (grid.dims() == 1) {
        x[0] = grid.axes[0].at(static_cast<int>(idx));
      } else {
        const int n2 = grid.axes[1].n_points;
        x[0] = grid.axes[0].at(static_cast<int>(idx / n2));
        x[1] = grid.axes[1].at(static_cast<int>(idx % n2));
      }
      v(idx) = effective_potential(x, params);
      double r2 = 0.0;
      for (double xi : x) r2 += xi * xi;
      psi(idx) = std::exp(-0.5 * r2);
    }
  }

  std::vector<IndexMap> group;
  {
    const double scale = std::max(v.cwiseAbs().maxCoeff(), 1e-300);
    for (auto& m : candidate_symmetries(grid.axes)) {
      double dev = 0.0;
      for (Index i = 0; i < n; ++i) dev = std::max(dev, std::abs(v(i) - v(m[static_cast<std::size_t>(i)])));
      if (dev <= 1e-12 * scale) group.push_back(std::move(m));
    }
  }
  symmetrize(psi, group);
  psi /= std::sqrt(psi.squaredNorm() * dv);

  SpectralKinetic fft(grid.axes, w);
  Eigen::VectorXd tmp(n);
  auto energy = [&](const Eigen::VectorXd& p) {
    fft.apply(p, tmp, fft.kinetic());
    return (tmp.dot(p) + p.cwiseProduct(v).dot(p)) * dv;
  };

  GroundStateResult res;
  double dtau = options.dtau > 0.0 ? options.dtau : 0.1 / w;
  double e = energy(psi);
  res.energy_history.push_back(e);
  std::vector<double> kin_prop(fft.kinetic().size());
  Eigen::VectorXd half_v(n);
  double prepared_dtau = -1.0;
  auto prepare = [&] {
    if (prepared_dtau == dtau) return;
    for (std::size_t k = 0; k < kin_prop.size(); ++k) kin_prop[k] = std::exp(-dtau * fft.kinetic()[k]);
    half_v = (-0.5 * dtau * v).array().exp().matrix();
    prepared_dtau = dtau;
  };

  Eigen::VectorXd next(n);
  int total = 0;
  for (int level = 0; level <= options.refinements; ++level) {
    bool converged = false;
    double change = INFINITY;
    while (total < options.max_iterations) {
      ++total;
      prepare();
      tmp = psi.cwiseProduct(half_v);
      fft.apply(tmp, next, kin_prop);
      next = next.cwiseProduct(half_v);
      next /= std::sqrt(next.squaredNorm() * dv);
      const double en = energy(next);
      const double slack = 1e-12 * std::max(std::abs(e), w);
      if (en > e + slack) {
        ++res.rejected_steps;
        dtau *= 0.5;
        continue;
      }
      change = std::abs(en - e);
      psi.swap(next);
      e = en;
      res.energy_history.push_back(e);
      if (change <= options.energy_tolerance * std::max(std::abs(e), w)) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "imaginary-time propagation did not converge in " << options.max_iterations
          << " iterations; last energy change " << change;
      throw ConvergenceError(msg.str(), change);
    }
    if (level < options.refinements) dtau *= 0.5;
  }

  symmetrize(psi, group);
  if (psi.sum() < 0.0) psi = -psi;
  psi /= std::sqrt(psi.squaredNorm() * dv);

  res.psi.axes = grid.axes;
  res.psi.values = std::move(psi);
  res.energy = energy(res.psi.values);
  res.iterations = total;
  res.final_dtau = dtau;

  const double leak = boundary_probability(res.psi);
  if (leak > options.boundary_tolerance) {
    std::ostringstream msg;
    msg << "probability " << leak << " on the grid boundary exceeds " << options.boundary_tolerance
        << "; enlarge the grid";
    throw BoundaryLeak(msg.str());
  }
  return res;
}

Eigen::MatrixXd hermite_functions(int n_max, std::span<const double> x) {
  if (n_max < 0) throw DomainError("n_max must be >= 0");
  const auto m = static_cast<Index>(x.size());
  Eigen::MatrixXd out(m, n_max + 1);
  const double c0 = std::pow(std::numbers::pi, -0.25);
  constexpr double big = 1e150;
  for (Index i = 0; i < m; ++i) {
    const double xi = x[static_cast<std::size_t>(i)];
    // Recur on phi_n e^{x^2/2} and carry the Gaussian as a log scale.
    double log_scale = -0.5 * xi * xi;
    double prev = 0.0;
    double cur = c0;
    for (int n = 0; n <= n_max; ++n) {
      out(i, n) = cur * std::exp(log_scale);
      const double next = std::sqrt(2.0 / (n + 1)) * xi * cur - std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
      prev = cur;
      cur = next;
      if (std::abs(cur) > big) {
        prev /= big;
        cur /= big;
        log_scale += std::log(big);
      }
    }
  }
  return out;
}

QuantumState FockProjection::state() const {
  return QuantumState::pure(HilbertSpace(dims), coefficients);
}

FockProjection fock_project(const PositionGrid& psi, std::span<const int> dims) {
  if (static_cast<int>(dims.size()) != psi.dims()) throw ShapeError("one truncation per grid axis is required");
  if (psi.values.size() != psi.size()) throw ShapeError("grid values do not match axes");
  for (int d : dims)
    if (d < 2) throw InvalidDimension("mechanical truncations must be >= 2");
  FockProjection res;
  res.dims.assign(dims.begin(), dims.end());
  const double dv = psi.cell_volume();

  if (psi.dims() == 1) {
    const Eigen::MatrixXd phi = hermite_functions(dims[0] - 1, psi.axes[0].points());
    const Eigen::VectorXd c = phi.transpose() * psi.values * psi.axes[0].spacing();
    const Eigen::VectorXd recon = phi * c;
    res.reconstruction_error = std::sqrt((psi.values - recon).squaredNorm() * dv);
    res.coefficients = c.cast<cplx>();
  } else {
    const int n1 = psi.axes[0].n_points;
    const int n2 = psi.axes[1].n_points;
    const Eigen::MatrixXd phi1 = hermite_functions(dims[0] - 1, psi.axes[0].points());
    const Eigen::MatrixXd phi2 = hermite_functions(dims[1] - 1, psi.axes[1].points());
    // Row-major grid values: Psi(i1, i2).
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> grid(
        psi.values.data(), n1, n2);
    const Eigen::MatrixXd c = phi1.transpose() * grid * phi2 * dv;
    const Eigen::MatrixXd recon = phi1 * c * phi2.transpose();
    res.reconstruction_error = std::sqrt((grid - recon).squaredNorm() * dv);
    res.coefficients.resize(static_cast<Index>(dims[0]) * dims[1]);
    for (int a = 0; a < dims[0]; ++a)
      for (int b = 0; b < dims[1]; ++b) res.coefficients(static_cast<Index>(a) * dims[1] + b) = c(a, b);
  }

  if (res.reconstruction_error > 1e-3) {
    std::ostringstream msg;
    msg << "Fock truncation reconstructs the wavefunction with L2 error " << res.reconstruction_error
        << " (> 1e-3); increase the mechanical dimensions";
    throw TruncationInadequate(msg.str());
  }
  if (res.reconstruction_error > 1e-4) {
    warn("Fock projection reconstruction error " + std::to_string(res.reconstruction_error) + " exceeds 1e-4");
  }
  res.coefficients /= res.coefficients.norm();
  return res;
}

}  // namespace optomech
