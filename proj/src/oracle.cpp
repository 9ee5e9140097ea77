#include "pipn/oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>

namespace pipn {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Degree-5, 7-point rule on the reference triangle: barycentric points and
// weights summing to one.
struct QuadPoint {
  double l0, l1, l2, w;
};
constexpr double kA1 = 0.059715871789770, kB1 = 0.470142064105115, kW1 = 0.132394152788506;
constexpr double kA2 = 0.797426985353087, kB2 = 0.101286507323456, kW2 = 0.125939180544827;
constexpr std::array<QuadPoint, 7> kQuad{{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
                                          {kA1, kB1, kB1, kW1},
                                          {kB1, kA1, kB1, kW1},
                                          {kB1, kB1, kA1, kW1},
                                          {kA2, kB2, kB2, kW2},
                                          {kB2, kA2, kB2, kW2},
                                          {kB2, kB2, kA2, kW2}}};

double cross(const Point& a, const Point& b) { return a.x() * b.y() - a.y() * b.x(); }

struct TriangleGeom {
  Point p[3];
  double area;
  double bx[3], by[3];  // basis gradients
};

TriangleGeom triangle_geom(const Mesh& mesh, Eigen::Index t) {
  TriangleGeom g;
  for (int i = 0; i < 3; ++i) g.p[i] = mesh.nodes.col(mesh.triangles(i, t));
  const double twice = cross(g.p[1] - g.p[0], g.p[2] - g.p[0]);
  g.area = 0.5 * twice;
  for (int i = 0; i < 3; ++i) {
    const Point& pj = g.p[(i + 1) % 3];
    const Point& pk = g.p[(i + 2) % 3];
    g.bx[i] = (pj.y() - pk.y()) / twice;
    g.by[i] = (pk.x() - pj.x()) / twice;
  }
  return g;
}

// Solves K x = f with x fixed on boundary-tagged rows.
Eigen::VectorXd solve_dirichlet(const Eigen::SparseMatrix<double>& K, const Eigen::VectorXd& f,
                                const std::vector<char>& fixed, const Eigen::VectorXd& fixed_values,
                                const SolverSettings& settings, const char* what) {
  const Eigen::Index n = K.rows();
  std::vector<Eigen::Index> free_index(n, -1);
  Eigen::Index nf = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!fixed[i]) free_index[i] = nf++;
  }
  Eigen::VectorXd rhs(nf);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (free_index[i] >= 0) rhs(free_index[i]) = f(i);
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(K.nonZeros());
  for (Eigen::Index col = 0; col < K.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(K, col); it; ++it) {
      const Eigen::Index r = it.row(), c = it.col();
      if (free_index[r] < 0) continue;
      if (free_index[c] >= 0) {
        trips.emplace_back(free_index[r], free_index[c], it.value());
      } else {
        rhs(free_index[r]) -= it.value() * fixed_values(c);
      }
    }
  }
  Eigen::SparseMatrix<double> Kff(nf, nf);
  Kff.setFromTriplets(trips.begin(), trips.end());

  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<double>>
      cg;
  cg.setTolerance(settings.tolerance);
  cg.setMaxIterations(settings.max_iterations);
  cg.compute(Kff);
  if (cg.info() != Eigen::Success) throw std::runtime_error(std::string(what) + ": preconditioner setup failed");
  Eigen::VectorXd xf = cg.solve(rhs);
  if (cg.info() != Eigen::Success) {
    throw std::runtime_error(std::string(what) + ": conjugate gradient did not converge in " +
                             std::to_string(cg.iterations()) + " iterations (relative residual " +
                             std::to_string(cg.error()) + ")");
  }
  Eigen::VectorXd x = fixed_values;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (free_index[i] >= 0) x(i) = xf(free_index[i]);
  }
  return x;
}

}  // namespace

void Material::validate() const {
  if (!(nu > 0 && nu < 0.5)) throw std::invalid_argument("Poisson ratio must lie in (0, 0.5)");
  if (!(alpha > 0)) throw std::invalid_argument("thermal expansion coefficient must be positive");
}

double Mesh::area(Eigen::Index t) const {
  const Point p0 = nodes.col(triangles(0, t));
  return 0.5 * cross(nodes.col(triangles(1, t)) - p0, nodes.col(triangles(2, t)) - p0);
}

double Mesh::diameter(Eigen::Index t) const {
  double d = 0;
  for (int i = 0; i < 3; ++i) {
    d = std::max(d, (nodes.col(triangles(i, t)) - nodes.col(triangles((i + 1) % 3, t))).norm());
  }
  return d;
}

double Mesh::max_diameter() const {
  double d = 0;
  for (Eigen::Index t = 0; t < triangle_count(); ++t) d = std::max(d, diameter(t));
  return d;
}

Mesh build_mesh(const DomainSpec& spec, int n_ring, int n_layers) {
  validate(spec);
  if (n_ring < 3 * spec.sides) {
    throw std::invalid_argument("build_mesh: n_ring must be at least 3 * sides (" + std::to_string(3 * spec.sides) +
                                ")");
  }
  if (n_layers < 4) throw std::invalid_argument("build_mesh: n_layers must be at least 4");

  const double h = spec.side_length / 2;
  const double theta0 = spec.orientation_deg * kDeg;
  const Point dir(std::cos(theta0), std::sin(theta0));
  const Point start = dir * (h / std::max(std::abs(dir.x()), std::abs(dir.y())));

  // Outer polyline from `start`, counter-clockwise through the corners.
  const std::array<Point, 4> corners{Point(h, h), Point(-h, h), Point(-h, -h), Point(h, -h)};
  auto corner_angle = [&](const Point& c) {
    double a = std::atan2(c.y(), c.x()) - theta0;
    while (a <= 0) a += 2 * std::numbers::pi;
    return a;
  };
  std::vector<Point> outer_corners(corners.begin(), corners.end());
  std::sort(outer_corners.begin(), outer_corners.end(),
            [&](const Point& a, const Point& b) { return corner_angle(a) < corner_angle(b); });
  std::vector<Point> outer{start};
  for (const auto& c : outer_corners) {
    if ((c - start).norm() > 1e-14) outer.push_back(c);
  }
  const auto cavity = cavity_polygon(spec);

  std::vector<Point> inner_ring(n_ring), outer_ring(n_ring);
  for (int i = 0; i < n_ring; ++i) {
    inner_ring[i] = along_polyline(cavity, static_cast<double>(i) / n_ring);
    outer_ring[i] = along_polyline(outer, static_cast<double>(i) / n_ring);
  }
  // Snap the nearest ring node onto every polygon vertex / square corner.
  auto snap = [&](std::vector<Point>& ring, const std::vector<Point>& poly) {
    std::vector<double> cum(poly.size() + 1, 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) cum[k + 1] = cum[k] + (poly[(k + 1) % poly.size()] - poly[k]).norm();
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const long idx = std::lround(cum[k] / cum.back() * n_ring) % n_ring;
      ring[idx] = poly[k];
    }
  };
  snap(inner_ring, cavity);
  snap(outer_ring, outer);

  Mesh mesh;
  mesh.n_ring = n_ring;
  mesh.n_layers = n_layers;
  const Eigen::Index n_nodes = static_cast<Eigen::Index>(n_ring) * (n_layers + 1);
  mesh.nodes.resize(2, n_nodes);
  mesh.tags.assign(n_nodes, BoundaryTag::none);
  for (int k = 0; k <= n_layers; ++k) {
    const double s = static_cast<double>(k) / n_layers;
    for (int i = 0; i < n_ring; ++i) {
      const Eigen::Index id = static_cast<Eigen::Index>(k) * n_ring + i;
      if (k == 0) {
        mesh.nodes.col(id) = inner_ring[i];
        mesh.tags[id] = BoundaryTag::cavity;
      } else if (k == n_layers) {
        mesh.nodes.col(id) = outer_ring[i];
        mesh.tags[id] = BoundaryTag::outer;
      } else {
        mesh.nodes.col(id) = (1 - s) * inner_ring[i] + s * outer_ring[i];
      }
    }
  }

  mesh.triangles.resize(3, 2 * static_cast<Eigen::Index>(n_ring) * n_layers);
  Eigen::Index t = 0;
  for (int k = 0; k < n_layers; ++k) {
    for (int i = 0; i < n_ring; ++i) {
      const int a = k * n_ring + i;
      const int b = k * n_ring + (i + 1) % n_ring;
      const int c = (k + 1) * n_ring + (i + 1) % n_ring;
      const int d = (k + 1) * n_ring + i;
      const double ac = (mesh.nodes.col(a) - mesh.nodes.col(c)).norm();
      const double bd = (mesh.nodes.col(b) - mesh.nodes.col(d)).norm();
      if (ac <= bd) {
        mesh.triangles.col(t++) << a, d, c;
        mesh.triangles.col(t++) << a, c, b;
      } else {
        mesh.triangles.col(t++) << a, d, b;
        mesh.triangles.col(t++) << b, d, c;
      }
    }
  }
  for (Eigen::Index e = 0; e < mesh.triangle_count(); ++e) {
    if (!(mesh.area(e) > 1e-14)) {
      throw std::runtime_error("build_mesh: degenerate or inverted triangle " + std::to_string(e) + " (area " +
                               std::to_string(mesh.area(e)) + ")");
    }
  }
  return mesh;
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  os << "pipn-mesh 1 " << mesh.node_count() << ' ' << mesh.triangle_count() << '\n';
  for (Eigen::Index i = 0; i < mesh.node_count(); ++i) {
    os << mesh.nodes(0, i) << ' ' << mesh.nodes(1, i) << ' ' << static_cast<int>(mesh.tags[i]) << '\n';
  }
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    os << mesh.triangles(0, t) << ' ' << mesh.triangles(1, t) << ' ' << mesh.triangles(2, t) << '\n';
  }
}

Eigen::SparseMatrix<double> assemble_laplace(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * mesh.triangle_count());
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = triangle_geom(mesh, t);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        trips.emplace_back(mesh.triangles(i, t), mesh.triangles(j, t),
                           g.area * (g.bx[i] * g.bx[j] + g.by[i] * g.by[j]));
      }
    }
  }
  Eigen::SparseMatrix<double> K(mesh.node_count(), mesh.node_count());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

Eigen::SparseMatrix<double> assemble_elasticity(const Mesh& mesh, const Material& mat) {
  mat.validate();
  Eigen::Matrix3d D;
  D << mat.a(), mat.b(), 0, mat.b(), mat.a(), 0, 0, 0, 0.5;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(36 * mesh.triangle_count());
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = triangle_geom(mesh, t);
    Eigen::Matrix<double, 3, 6> B = Eigen::Matrix<double, 3, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
      B(0, 2 * i) = g.bx[i];
      B(1, 2 * i + 1) = g.by[i];
      B(2, 2 * i) = g.by[i];
      B(2, 2 * i + 1) = g.bx[i];
    }
    const Eigen::Matrix<double, 6, 6> Ke = g.area * B.transpose() * D * B;
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        trips.emplace_back(2 * mesh.triangles(i / 2, t) + i % 2, 2 * mesh.triangles(j / 2, t) + j % 2, Ke(i, j));
      }
    }
  }
  Eigen::SparseMatrix<double> K(2 * mesh.node_count(), 2 * mesh.node_count());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

ScalarField solve_temperature(const Mesh& mesh, const SolverSettings& settings) {
  return solve_temperature(
      mesh, [](const Point&, BoundaryTag tag) { return tag == BoundaryTag::outer ? 1.0 : 0.0; }, settings);
}

ScalarField solve_temperature(const Mesh& mesh, const BoundaryValue& dirichlet, const SolverSettings& settings) {
  const Eigen::Index n = mesh.node_count();
  std::vector<char> fixed(n, 0);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mesh.tags[i] != BoundaryTag::none) {
      fixed[i] = 1;
      values(i) = dirichlet(mesh.nodes.col(i), mesh.tags[i]);
    }
  }
  return solve_dirichlet(assemble_laplace(mesh), Eigen::VectorXd::Zero(n), fixed, values, settings,
                         "solve_temperature");
}

DisplacementField solve_plane_stress(const Mesh& mesh, const ScalarField& temperature, const Material& mat,
                                     const SolverSettings& settings, const VectorSource& source,
                                     const BoundaryValue& dirichlet_u, const BoundaryValue& dirichlet_v) {
  mat.validate();
  const Eigen::Index n = mesh.node_count();
  if (temperature.size() != n) {
    throw std::invalid_argument("solve_plane_stress: temperature has " + std::to_string(temperature.size()) +
                                " values for " + std::to_string(n) + " nodes");
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * n);
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = triangle_geom(mesh, t);
    double t_mean = 0;
    for (int i = 0; i < 3; ++i) t_mean += temperature(mesh.triangles(i, t)) / 3.0;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Index node = mesh.triangles(i, t);
      f(2 * node) += mat.beta() * g.area * t_mean * g.bx[i];
      f(2 * node + 1) += mat.beta() * g.area * t_mean * g.by[i];
    }
    if (source) {
      for (const auto& q : kQuad) {
        const Point x = q.l0 * g.p[0] + q.l1 * g.p[1] + q.l2 * g.p[2];
        const Eigen::Vector2d s = source(x);
        const double lam[3] = {q.l0, q.l1, q.l2};
        for (int i = 0; i < 3; ++i) {
          const Eigen::Index node = mesh.triangles(i, t);
          f(2 * node) += q.w * g.area * s.x() * lam[i];
          f(2 * node + 1) += q.w * g.area * s.y() * lam[i];
        }
      }
    }
  }

  std::vector<char> fixed(2 * n, 0);
  Eigen::VectorXd values = Eigen::VectorXd::Zero(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mesh.tags[i] == BoundaryTag::none) continue;
    fixed[2 * i] = fixed[2 * i + 1] = 1;
    if (dirichlet_u) values(2 * i) = dirichlet_u(mesh.nodes.col(i), mesh.tags[i]);
    if (dirichlet_v) values(2 * i + 1) = dirichlet_v(mesh.nodes.col(i), mesh.tags[i]);
  }
  const Eigen::VectorXd x =
      solve_dirichlet(assemble_elasticity(mesh, mat), f, fixed, values, settings, "solve_plane_stress");
  DisplacementField out;
  out.u.resize(n);
  out.v.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.u(i) = x(2 * i);
    out.v(i) = x(2 * i + 1);
  }
  return out;
}

TriangleLocator::TriangleLocator(const Mesh& mesh, int bins) : mesh_(&mesh) {
  bins_ = bins > 0 ? bins : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.triangle_count()) / 2)));
  const Eigen::Vector2d lo = mesh.nodes.rowwise().minCoeff();
  const Eigen::Vector2d hi = mesh.nodes.rowwise().maxCoeff();
  x0_ = lo.x();
  y0_ = lo.y();
  cell_ = std::max(hi.x() - lo.x(), hi.y() - lo.y()) / bins_ * (1 + 1e-12);
  buckets_.resize(static_cast<std::size_t>(bins_) * bins_);
  const double pad = 1e-6;
  auto clampi = [&](double v) { return std::clamp(static_cast<int>(std::floor(v)), 0, bins_ - 1); };
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (int i = 0; i < 3; ++i) {
      const auto p = mesh.nodes.col(mesh.triangles(i, t));
      xmin = std::min(xmin, p.x());
      xmax = std::max(xmax, p.x());
      ymin = std::min(ymin, p.y());
      ymax = std::max(ymax, p.y());
    }
    for (int bx = clampi((xmin - pad - x0_) / cell_); bx <= clampi((xmax + pad - x0_) / cell_); ++bx) {
      for (int by = clampi((ymin - pad - y0_) / cell_); by <= clampi((ymax + pad - y0_) / cell_); ++by) {
        buckets_[static_cast<std::size_t>(by) * bins_ + bx].push_back(t);
      }
    }
  }
}

MeshLocation TriangleLocator::locate(const Point& p, double tol) const {
  const int bx = static_cast<int>(std::floor((p.x() - x0_) / cell_));
  const int by = static_cast<int>(std::floor((p.y() - y0_) / cell_));
  if (bx < 0 || by < 0 || bx >= bins_ || by >= bins_) {
    // Could still be within tol of the bounding box; fall back to a clamped bucket.
    if (bx < -1 || by < -1 || bx > bins_ || by > bins_) return {};
  }
  const auto& bucket = buckets_[static_cast<std::size_t>(std::clamp(by, 0, bins_ - 1)) * bins_ +
                                std::clamp(bx, 0, bins_ - 1)];
  for (Eigen::Index t : bucket) {
    const Point p0 = mesh_->nodes.col(mesh_->triangles(0, t));
    const Point p1 = mesh_->nodes.col(mesh_->triangles(1, t));
    const Point p2 = mesh_->nodes.col(mesh_->triangles(2, t));
    const double twice = cross(p1 - p0, p2 - p0);
    const Eigen::Vector3d lam(cross(p1 - p, p2 - p) / twice, cross(p2 - p, p0 - p) / twice,
                              cross(p0 - p, p1 - p) / twice);
    // Signed distance to the edge opposite each vertex.
    const double d0 = lam(0) * twice / (p1 - p2).norm();
    const double d1 = lam(1) * twice / (p2 - p0).norm();
    const double d2 = lam(2) * twice / (p0 - p1).norm();
    if (d0 >= -tol && d1 >= -tol && d2 >= -tol) return {t, lam};
  }
  return {};
}

Eigen::Vector2d triangle_gradient(const Mesh& mesh, Eigen::Index t, const ScalarField& f) {
  const auto g = triangle_geom(mesh, t);
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (int i = 0; i < 3; ++i) {
    const double fi = f(mesh.triangles(i, t));
    grad.x() += fi * g.bx[i];
    grad.y() += fi * g.by[i];
  }
  return grad;
}

namespace {

double barycentric_value(const Mesh& mesh, const MeshLocation& loc, const ScalarField& f) {
  double v = 0;
  for (int i = 0; i < 3; ++i) {
    if (loc.barycentric(i) != 0) v += loc.barycentric(i) * f(mesh.triangles(i, loc.triangle));
  }
  return v;
}

}  // namespace

void interpolate_to_cloud(const Mesh& mesh, const ScalarField& temperature, const DisplacementField& disp,
                          PointCloud& cloud, double tol) {
  const Eigen::Index n = cloud.size();
  if (temperature.size() != mesh.node_count() || disp.u.size() != mesh.node_count() ||
      disp.v.size() != mesh.node_count()) {
    throw std::invalid_argument("interpolate_to_cloud: field size does not match mesh");
  }
  const TriangleLocator locator(mesh);
  cloud.temperature.resize(n);
  cloud.temp_grad.resize(2, n);
  cloud.u_ref.resize(n);
  cloud.v_ref.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto loc = locator.locate(cloud.coords.col(j), tol);
    if (loc.triangle < 0) {
      throw std::runtime_error("interpolate_to_cloud: point " + std::to_string(j) + " lies outside the mesh");
    }
    cloud.temperature(j) = barycentric_value(mesh, loc, temperature);
    cloud.temp_grad.col(j) = triangle_gradient(mesh, loc.triangle, temperature);
    cloud.u_ref(j) = barycentric_value(mesh, loc, disp.u);
    cloud.v_ref(j) = barycentric_value(mesh, loc, disp.v);
  }
}

Eigen::VectorXd interpolate(const Mesh& mesh, const ScalarField& f, const Eigen::Matrix2Xd& points, double tol) {
  const TriangleLocator locator(mesh);
  Eigen::VectorXd out(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const auto loc = locator.locate(points.col(j), tol);
    if (loc.triangle < 0) throw std::runtime_error("interpolate: point " + std::to_string(j) + " outside mesh");
    out(j) = barycentric_value(mesh, loc, f);
  }
  return out;
}

double l2_error(const Mesh& mesh, const ScalarField& f, const std::function<double(const Point&)>& exact) {
  double sum = 0;
  for (Eigen::Index t = 0; t < mesh.triangle_count(); ++t) {
    const auto g = triangle_geom(mesh, t);
    const double fv[3] = {f(mesh.triangles(0, t)), f(mesh.triangles(1, t)), f(mesh.triangles(2, t))};
    for (const auto& q : kQuad) {
      const Point x = q.l0 * g.p[0] + q.l1 * g.p[1] + q.l2 * g.p[2];
      const double e = q.l0 * fv[0] + q.l1 * fv[1] + q.l2 * fv[2] - exact(x);
      sum += q.w * g.area * e * e;
    }
  }
  return std::sqrt(sum);
}

std::string ManufacturedCase::name() const {
  return id_ == ManufacturedId::trigonometric ? "trigonometric" : "polynomial";
}

Eigen::Vector2d ManufacturedCase::forcing(const Point& p) const {
  const double a = mat_.a(), b = mat_.b(), beta = mat_.beta();
  const double x = p.x(), y = p.y();
  if (id_ == ManufacturedId::trigonometric) {
    const double S = std::sin(kPi * x) * std::sin(kPi * y);
    const double C = std::cos(kPi * x) * std::cos(kPi * y);
    const double common = kPi * kPi / 50.0 * ((a + 0.5) * S - (b + 0.5) * C);
    return {common + 2 * beta * x, common - 2 * beta * y};
  }
  const double k = (2 * a + 2 * b + 1) / 100.0;
  return {-k * y + 2 * beta * x, -k * x - 2 * beta * y};
}

ManufacturedCase manufactured_case(const std::string& name, const Material& mat) {
  mat.validate();
  if (name == "trigonometric" || name == "trig") return {ManufacturedId::trigonometric, mat};
  if (name == "polynomial" || name == "poly") return {ManufacturedId::polynomial, mat};
  throw std::invalid_argument("unknown manufactured case '" + name + "'");
}

}  // namespace pipn
