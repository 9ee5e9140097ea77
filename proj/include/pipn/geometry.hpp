#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pipn {

using Point = Eigen::Vector2d;

/// One square plate (centered at the origin) with a regular polygonal cavity.
struct DomainSpec {
  int sides = 6;                ///< cavity polygon side count, 4..9
  double circumradius = 0.30;   ///< cavity circumradius [m]
  double orientation_deg = 1;   ///< cavity rotation about the origin [deg]
  double side_length = 2.0;     ///< outer square side [m]

  bool operator==(const DomainSpec&) const = default;
};

/// Cavity circumradius used by the geometry family for a given side count.
double family_circumradius(int sides);
/// Largest (odd) orientation in degrees enumerated for a given side count.
int family_max_orientation(int sides);
std::string shape_name(int sides);

/// Throws std::invalid_argument if the cavity does not fit strictly inside
/// the plate or the parameters are out of range.
void validate(const DomainSpec& spec);

/// Short stable identifier, e.g. "hex_s2.0_o7".
std::string domain_id(const DomainSpec& spec);

using DomainPredicate = std::function<bool(const DomainSpec&)>;

/// All shapes x odd orientations x side lengths {1.6, 1.8, 2.0}, ordered by
/// (sides, side length, orientation). An empty predicate keeps everything.
std::vector<DomainSpec> enumerate_domains(const DomainPredicate& keep = {});

/// Cavity vertices, counter-clockwise, first vertex at the orientation angle.
std::vector<Point> cavity_polygon(const DomainSpec& spec);

/// Point at arc-length fraction t in [0, 1) along a closed polyline.
Point along_polyline(const std::vector<Point>& verts, double t);

enum class PointKind : std::uint8_t { interior = 0, outer_boundary = 1, cavity_boundary = 2 };

const char* to_string(PointKind k);
PointKind parse_point_kind(const std::string& s);

/// A sampled point cloud. Field members are empty until the oracle fills them.
struct PointCloud {
  DomainSpec domain;
  Eigen::Matrix2Xd coords;
  std::vector<PointKind> kinds;
  Eigen::VectorXd temperature;   ///< T per point
  Eigen::Matrix2Xd temp_grad;    ///< (dT/dx, dT/dy) per point
  Eigen::VectorXd u_ref, v_ref;  ///< reference displacements, if known

  Eigen::Index size() const { return coords.cols(); }
  bool has_fields() const { return temperature.size() == size() && temp_grad.cols() == size(); }
  bool has_reference() const { return u_ref.size() == size() && v_ref.size() == size(); }
};

/// Default split of the boundary budget for an N-point cloud: 20% of N on
/// boundaries, 70% of that on the outer square, the rest on the cavity.
struct BoundarySplit {
  int outer = 0;
  int cavity = 0;
};
BoundarySplit default_boundary_split(int n_points);

/// Samples N points: n_outer and n_cavity arc-length-uniform boundary points,
/// plus interior points chosen by farthest-point sampling from a uniform grid
/// kept half a grid spacing away from both boundaries.
///
/// grid_spacing <= 0 picks a spacing giving about sixteen times as many
/// candidates as needed. Throws if the grid cannot supply enough interior candidates.
PointCloud sample_point_cloud(const DomainSpec& spec, int n_points, int n_outer, int n_cavity,
                              std::uint64_t seed, double grid_spacing = 0.0);

/// Greedy farthest-point selection of `count` candidates given already-fixed
/// points. Candidates are processed in lexicographic (x, y) order, so the
/// result does not depend on their input order; the first pick is drawn
/// from `seed`, later ties go to the lowest canonical index. Returns the
/// selected candidates in canonical order.
Eigen::Matrix2Xd farthest_point_sampling(const Eigen::Matrix2Xd& fixed, const Eigen::Matrix2Xd& candidates,
                                         int count, std::uint64_t seed);

/// Sparse displacement observations.
struct SensorSet {
  std::vector<int> indices;
  Eigen::VectorXd u, v;

  int size() const { return static_cast<int>(indices.size()); }
};

/// Picks M roughly equally spaced sensor points among the non-cavity points
/// of the cloud (see README for the lattice rule).
std::vector<int> place_sensors(const PointCloud& cloud, int m);

/// Lattice spacing place_sensors uses for M sensors on this plate.
double sensor_lattice_spacing(const DomainSpec& spec, int m);

enum class Membership { interior, on_boundary, outside };

/// Classifies p against the plate-with-cavity by half-plane tests.
Membership point_in_domain(const DomainSpec& spec, const Point& p, double tol = 1e-12);

/// Euclidean distance from p to the cavity polygon's boundary.
double distance_to_cavity(const std::vector<Point>& polygon, const Point& p);

/// True if p is strictly inside the convex polygon by more than tol.
bool inside_polygon(const std::vector<Point>& polygon, const Point& p, double tol = 0.0);

}  // namespace pipn
