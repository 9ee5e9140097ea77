#pragma once

// Linear-triangle finite elements on structured annular meshes: steady heat
// conduction and plane-stress thermoelasticity, used for ground truth and
// sensor data.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pipn/geometry.hpp"
#include "pipn/jet.hpp"

namespace pipn {

/// Elastic material. Young's modulus cancels from the normalized equations.
struct Material {
  double nu = 0.3;
  double alpha = 1.0;

  void validate() const;
  double a() const { return 1.0 / (1.0 - nu); }   ///< 1/(1-nu)
  double b() const { return nu / (1.0 - nu); }    ///< nu/(1-nu)
  double beta() const { return alpha / (1.0 - nu); }  ///< thermal coefficient alpha/(1-nu)
};

enum class BoundaryTag : std::uint8_t { none = 0, outer = 1, cavity = 2 };

struct Mesh {
  Eigen::Matrix2Xd nodes;
  Eigen::Matrix3Xi triangles;   ///< counter-clockwise node indices
  std::vector<BoundaryTag> tags;
  int n_ring = 0;
  int n_layers = 0;

  Eigen::Index node_count() const { return nodes.cols(); }
  Eigen::Index triangle_count() const { return triangles.cols(); }
  double area(Eigen::Index t) const;
  double diameter(Eigen::Index t) const;
  double max_diameter() const;
};

/// Structured annular mesh between the cavity polygon (ring 0) and the outer
/// square (ring n_layers), n_ring nodes per ring aligned by normalized arc
/// length from the cavity orientation angle. Polygon and square corners are
/// always mesh nodes. Quads are split along their shorter diagonal.
Mesh build_mesh(const DomainSpec& spec, int n_ring, int n_layers);

/// Triangle-list text export: header line, node lines "x y tag", triangle
/// lines "i j k".
void write_mesh(std::ostream& os, const Mesh& mesh);

using ScalarField = Eigen::VectorXd;

struct DisplacementField {
  Eigen::VectorXd u, v;
};

using BoundaryValue = std::function<double(const Point&, BoundaryTag)>;
using VectorSource = std::function<Eigen::Vector2d(const Point&)>;

/// P1 Laplace stiffness, all nodes, no boundary conditions applied.
Eigen::SparseMatrix<double> assemble_laplace(const Mesh& mesh);

/// P1 plane-stress stiffness for the normalized operator (interleaved
/// u, v unknowns: 2i, 2i+1), no boundary conditions applied.
Eigen::SparseMatrix<double> assemble_elasticity(const Mesh& mesh, const Material& mat);

struct SolverSettings {
  double tolerance = 1e-10;
  int max_iterations = 20000;
};

/// Solves Laplace(T) = 0 with T = 1 on the outer square and T = 0 on the
/// cavity.
ScalarField solve_temperature(const Mesh& mesh, const SolverSettings& settings = {});

/// Laplace(T) = 0 with arbitrary Dirichlet data on every boundary node.
ScalarField solve_temperature(const Mesh& mesh, const BoundaryValue& dirichlet,
                              const SolverSettings& settings = {});

/// Plane-stress thermoelasticity in the normalized form
///   -div(sigma(u)) + alpha/(1-nu) grad T = s
/// with sigma = D eps, D = [[1/(1-nu), nu/(1-nu), 0], [nu/(1-nu), 1/(1-nu), 0],
/// [0, 0, 1/2]]. Zero displacement on the boundary unless `dirichlet_u/v`
/// are given; `source` is the optional forcing s.
DisplacementField solve_plane_stress(const Mesh& mesh, const ScalarField& temperature, const Material& mat,
                                     const SolverSettings& settings = {}, const VectorSource& source = {},
                                     const BoundaryValue& dirichlet_u = {}, const BoundaryValue& dirichlet_v = {});

/// Location of a point in the mesh.
struct MeshLocation {
  Eigen::Index triangle = -1;
  Eigen::Vector3d barycentric;
};

/// Lowest-index triangle containing p within `tol` (distance), or -1.
class TriangleLocator {
 public:
  explicit TriangleLocator(const Mesh& mesh, int bins = 0);
  MeshLocation locate(const Point& p, double tol = 1e-9) const;

 private:
  const Mesh* mesh_;
  int bins_;
  double x0_, y0_, cell_;
  std::vector<std::vector<Eigen::Index>> buckets_;
};

/// Gradient of a P1 field on one triangle.
Eigen::Vector2d triangle_gradient(const Mesh& mesh, Eigen::Index t, const ScalarField& f);

/// Fills temperature, temp_grad, u_ref, v_ref of the cloud from nodal fields.
/// Throws if a point lies outside the mesh by more than `tol`.
void interpolate_to_cloud(const Mesh& mesh, const ScalarField& temperature, const DisplacementField& disp,
                          PointCloud& cloud, double tol = 1e-9);

/// Interpolated scalar values at arbitrary points.
Eigen::VectorXd interpolate(const Mesh& mesh, const ScalarField& f, const Eigen::Matrix2Xd& points,
                            double tol = 1e-9);

/// L2 norm over the mesh of (f_h - exact), using a degree-5 rule per triangle.
double l2_error(const Mesh& mesh, const ScalarField& f, const std::function<double(const Point&)>& exact);

// ---------------------------------------------------------------------------
// Manufactured solutions

enum class ManufacturedId { trigonometric, polynomial };

/// Closed-form displacement/temperature fields and the forcing (s_x, s_y)
/// that makes them satisfy the normalized momentum residuals exactly.
///
///   trigonometric: u = v = sin(pi x) sin(pi y) / 50, T = x^2 - y^2
///   polynomial:    u = x^2 y / 100, v = x y^2 / 100, T = x^2 - y^2
class ManufacturedCase {
 public:
  ManufacturedCase(ManufacturedId id, Material mat) : id_(id), mat_(mat) {}

  ManufacturedId id() const { return id_; }
  const Material& material() const { return mat_; }
  std::string name() const;

  template <typename S>
  S u(const S& x, const S& y) const {
    using std::sin;
    if (id_ == ManufacturedId::trigonometric) return (1.0 / 50.0) * (sin(kPi * x) * sin(kPi * y));
    return (1.0 / 100.0) * (x * x * y);
  }

  template <typename S>
  S v(const S& x, const S& y) const {
    using std::sin;
    if (id_ == ManufacturedId::trigonometric) return (1.0 / 50.0) * (sin(kPi * x) * sin(kPi * y));
    return (1.0 / 100.0) * (x * y * y);
  }

  template <typename S>
  S T(const S& x, const S& y) const {
    return x * x - y * y;
  }

  /// (dT/dx, dT/dy).
  Eigen::Vector2d temperature_gradient(const Point& p) const { return {2 * p.x(), -2 * p.y()}; }

  /// (s_x, s_y): the momentum residual operator applied to (u, v, T).
  Eigen::Vector2d forcing(const Point& p) const;

 private:
  static constexpr double kPi = 3.14159265358979323846;
  ManufacturedId id_;
  Material mat_;
};

/// Looks up a case by name ("trigonometric" / "polynomial").
ManufacturedCase manufactured_case(const std::string& name, const Material& mat = {});

}  // namespace pipn
