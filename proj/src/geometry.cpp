#include "pipn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pipn {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kSideLengths[] = {1.6, 1.8, 2.0};

// Signed distance to the line through a->b; positive to the right, which is
// outside for a counter-clockwise polygon.
double edge_distance(const Point& a, const Point& b, const Point& p) {
  const Point e = b - a;
  return (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x())) / -e.norm();
}

double segment_distance(const Point& a, const Point& b, const Point& p) {
  const Point e = b - a;
  const double t = std::clamp((p - a).dot(e) / e.squaredNorm(), 0.0, 1.0);
  return (a + t * e - p).norm();
}

}  // namespace

Point along_polyline(const std::vector<Point>& verts, double t) {
  const std::size_t n = verts.size();
  std::vector<double> len(n);
  double total = 0;
  for (std::size_t k = 0; k < n; ++k) {
    len[k] = (verts[(k + 1) % n] - verts[k]).norm();
    total += len[k];
  }
  double s = t * total;
  for (std::size_t k = 0; k < n; ++k) {
    if (len[k] == 0) continue;
    if (s <= len[k] || k + 1 == n) {
      const double tau = std::clamp(s / len[k], 0.0, 1.0);
      const Point& a = verts[k];
      const Point& b = verts[(k + 1) % n];
      // Keep axis-aligned edges exactly on their line.
      Point p = a + tau * (b - a);
      if (a.x() == b.x()) p.x() = a.x();
      if (a.y() == b.y()) p.y() = a.y();
      return p;
    }
    s -= len[k];
  }
  return verts.front();
}

namespace {

std::vector<Point> square_corners(double side) {
  const double h = side / 2;
  return {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
}

double polygon_area(const std::vector<Point>& v) {
  double a = 0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const Point& p = v[k];
    const Point& q = v[(k + 1) % v.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

}  // namespace

double family_circumradius(int sides) { return sides == 4 ? 0.35 : 0.30; }

int family_max_orientation(int sides) {
  switch (sides) {
    case 4: return 89;
    case 5: return 71;
    case 6: return 59;
    case 7: return 51;
    case 8: return 45;
    case 9: return 39;
    default: throw std::invalid_argument("no cavity family with " + std::to_string(sides) + " sides");
  }
}

std::string shape_name(int sides) {
  switch (sides) {
    case 4: return "square";
    case 5: return "pentagon";
    case 6: return "hexagon";
    case 7: return "heptagon";
    case 8: return "octagon";
    case 9: return "nonagon";
    default: return std::to_string(sides) + "-gon";
  }
}

void validate(const DomainSpec& spec) {
  if (spec.sides < 3) throw std::invalid_argument("cavity needs at least 3 sides");
  if (!(spec.circumradius > 0)) throw std::invalid_argument("cavity circumradius must be positive");
  if (!(spec.side_length > 0)) throw std::invalid_argument("plate side length must be positive");
  if (!(spec.circumradius < spec.side_length / 2)) {
    throw std::invalid_argument("cavity (R=" + std::to_string(spec.circumradius) +
                                ") does not fit strictly inside plate of side " + std::to_string(spec.side_length));
  }
}

std::string domain_id(const DomainSpec& spec) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_s%.1f_o%g", shape_name(spec.sides).c_str(), spec.side_length,
                spec.orientation_deg);
  return buf;
}

std::vector<DomainSpec> enumerate_domains(const DomainPredicate& keep) {
  std::vector<DomainSpec> out;
  for (int sides = 4; sides <= 9; ++sides) {
    for (double side : kSideLengths) {
      for (int omega = 1; omega <= family_max_orientation(sides); omega += 2) {
        DomainSpec d{sides, family_circumradius(sides), static_cast<double>(omega), side};
        if (!keep || keep(d)) out.push_back(d);
      }
    }
  }
  return out;
}

std::vector<Point> cavity_polygon(const DomainSpec& spec) {
  std::vector<Point> v(spec.sides);
  for (int k = 0; k < spec.sides; ++k) {
    const double theta = (spec.orientation_deg + 360.0 * k / spec.sides) * kDeg;
    v[k] = spec.circumradius * Point(std::cos(theta), std::sin(theta));
  }
  return v;
}

const char* to_string(PointKind k) {
  switch (k) {
    case PointKind::interior: return "interior";
    case PointKind::outer_boundary: return "outer_boundary";
    case PointKind::cavity_boundary: return "cavity_boundary";
  }
  return "?";
}

PointKind parse_point_kind(const std::string& s) {
  if (s == "interior") return PointKind::interior;
  if (s == "outer_boundary") return PointKind::outer_boundary;
  if (s == "cavity_boundary") return PointKind::cavity_boundary;
  throw std::invalid_argument("unknown point kind '" + s + "'");
}

BoundarySplit default_boundary_split(int n_points) {
  const int budget = static_cast<int>(std::lround(0.2 * n_points));
  const int outer = static_cast<int>(std::lround(0.7 * budget));
  return {outer, budget - outer};
}

double distance_to_cavity(const std::vector<Point>& polygon, const Point& p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    d = std::min(d, segment_distance(polygon[k], polygon[(k + 1) % polygon.size()], p));
  }
  return d;
}

bool inside_polygon(const std::vector<Point>& polygon, const Point& p, double tol) {
  for (std::size_t k = 0; k < polygon.size(); ++k) {
    if (edge_distance(polygon[k], polygon[(k + 1) % polygon.size()], p) >= -tol) return false;
  }
  return true;
}

Membership point_in_domain(const DomainSpec& spec, const Point& p, double tol) {
  if (!(tol > 0)) throw std::invalid_argument("point_in_domain: tolerance must be positive");
  const double h = spec.side_length / 2;
  const double ex = std::abs(p.x()) - h;
  const double ey = std::abs(p.y()) - h;
  if (ex > tol || ey > tol) return Membership::outside;
  if (ex >= -tol || ey >= -tol) return Membership::on_boundary;

  const auto poly = cavity_polygon(spec);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < poly.size(); ++k) {
    worst = std::max(worst, edge_distance(poly[k], poly[(k + 1) % poly.size()], p));
  }
  if (worst < -tol) return Membership::outside;
  if (worst <= tol) return Membership::on_boundary;
  return Membership::interior;
}

Eigen::Matrix2Xd farthest_point_sampling(const Eigen::Matrix2Xd& fixed, const Eigen::Matrix2Xd& candidates,
                                         int count, std::uint64_t seed) {
  const Eigen::Index nc = candidates.cols();
  if (count < 0 || count > nc) {
    throw std::invalid_argument("farthest_point_sampling: need " + std::to_string(count) + " of " +
                                std::to_string(nc) + " candidates");
  }
  std::vector<Eigen::Index> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (candidates(0, a) != candidates(0, b)) return candidates(0, a) < candidates(0, b);
    return candidates(1, a) < candidates(1, b);
  });
  Eigen::Matrix2Xd cand(2, nc);
  for (Eigen::Index i = 0; i < nc; ++i) cand.col(i) = candidates.col(order[i]);

  std::vector<double> dist(nc, std::numeric_limits<double>::infinity());
  std::vector<char> taken(nc, 0);
  if (count == 0) return Eigen::Matrix2Xd(2, 0);
  auto absorb = [&](const Point& q) {
    for (Eigen::Index i = 0; i < nc; ++i) dist[i] = std::min(dist[i], (cand.col(i) - q).squaredNorm());
  };
  for (Eigen::Index k = 0; k < fixed.cols(); ++k) absorb(fixed.col(k));

  {
    std::mt19937_64 rng(seed);
    const Eigen::Index first = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(nc));
    taken[first] = 1;
    absorb(cand.col(first));
  }
  for (int picked = 1; picked < count; ++picked) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < nc; ++i) {
      if (!taken[i] && (best < 0 || dist[i] > dist[best])) best = i;
    }
    if (best < 0) break;
    taken[best] = 1;
    absorb(cand.col(best));
  }

  Eigen::Matrix2Xd out(2, count);
  Eigen::Index w = 0;
  for (Eigen::Index i = 0; i < nc; ++i) {
    if (taken[i]) out.col(w++) = cand.col(i);
  }
  return out;
}

PointCloud sample_point_cloud(const DomainSpec& spec, int n_points, int n_outer, int n_cavity,
                              std::uint64_t seed, double grid_spacing) {
  validate(spec);
  if (n_points < 50) throw std::invalid_argument("sample_point_cloud: N must be at least 50");
  if (n_outer < 4 || n_cavity < spec.sides) {
    throw std::invalid_argument("sample_point_cloud: too few boundary points");
  }
  if (n_points <= n_outer + n_cavity) {
    throw std::invalid_argument("sample_point_cloud: N must exceed the boundary point count");
  }
  const int n_interior = n_points - n_outer - n_cavity;
  const auto poly = cavity_polygon(spec);
  const auto square = square_corners(spec.side_length);

  PointCloud cloud;
  cloud.domain = spec;
  cloud.coords.resize(2, n_points);
  cloud.kinds.reserve(n_points);
  Eigen::Index w = 0;
  for (int i = 0; i < n_outer; ++i) {
    cloud.coords.col(w++) = along_polyline(square, static_cast<double>(i) / n_outer);
    cloud.kinds.push_back(PointKind::outer_boundary);
  }
  for (int i = 0; i < n_cavity; ++i) {
    cloud.coords.col(w++) = along_polyline(poly, static_cast<double>(i) / n_cavity);
    cloud.kinds.push_back(PointKind::cavity_boundary);
  }

  const double area = spec.side_length * spec.side_length - polygon_area(poly);
  // A lattice only slightly denser than the target makes farthest-point ties
  // collapse into whichever candidates sort first, leaving bands and gaps.
  constexpr double kOversample = 16.0;
  const double h = grid_spacing > 0 ? grid_spacing : std::sqrt(area / (kOversample * n_interior));
  const int per_axis = static_cast<int>(std::floor(spec.side_length / h));
  std::vector<Point> grid;
  for (int i = 0; i < per_axis; ++i) {
    const double x = -(per_axis - 1) * h / 2 + i * h;
    for (int j = 0; j < per_axis; ++j) {
      const Point p(x, -(per_axis - 1) * h / 2 + j * h);
      if (inside_polygon(poly, p)) continue;
      if (distance_to_cavity(poly, p) < h / 2) continue;
      grid.push_back(p);
    }
  }
  if (static_cast<int>(grid.size()) < n_interior) {
    throw std::runtime_error("sample_point_cloud: grid spacing " + std::to_string(h) + " yields " +
                             std::to_string(grid.size()) + " interior candidates, " +
                             std::to_string(n_interior) + " required");
  }
  Eigen::Matrix2Xd cand(2, grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) cand.col(i) = grid[i];

  const Eigen::Matrix2Xd chosen = farthest_point_sampling(cloud.coords.leftCols(w), cand, n_interior, seed);
  cloud.coords.rightCols(n_interior) = chosen;
  cloud.kinds.resize(n_points, PointKind::interior);
  return cloud;
}

double sensor_lattice_spacing(const DomainSpec& spec, int m) {
  const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  return spec.side_length / k;
}

std::vector<int> place_sensors(const PointCloud& cloud, int m) {
  if (m < 1) throw std::invalid_argument("place_sensors: M must be positive");
  std::vector<int> candidates;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    if (cloud.kinds[i] != PointKind::cavity_boundary) candidates.push_back(static_cast<int>(i));
  }
  if (m > static_cast<int>(candidates.size())) {
    throw std::invalid_argument("place_sensors: " + std::to_string(m) + " sensors requested, only " +
                                std::to_string(candidates.size()) + " non-cavity points available");
  }
  const auto& spec = cloud.domain;
  const auto poly = cavity_polygon(spec);
  const int k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  const double spacing = spec.side_length / k;

  std::vector<char> used(cloud.size(), 0);
  std::vector<int> chosen;
  for (int iy = 0; iy < k && static_cast<int>(chosen.size()) < m; ++iy) {
    for (int ix = 0; ix < k && static_cast<int>(chosen.size()) < m; ++ix) {
      const Point node(-spec.side_length / 2 + (ix + 0.5) * spacing, -spec.side_length / 2 + (iy + 0.5) * spacing);
      if (inside_polygon(poly, node) || distance_to_cavity(poly, node) < spacing / 2) continue;
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c : candidates) {
        if (used[c]) continue;
        const double d = (cloud.coords.col(c) - node).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      used[best] = 1;
      chosen.push_back(best);
    }
  }

  // Fill the remainder by farthest-point selection among unused candidates,
  // starting from the plate center if nothing was chosen yet.
  std::vector<double> dist(cloud.size(), std::numeric_limits<double>::infinity());
  auto absorb = [&](const Point& q) {
    for (int c : candidates) dist[c] = std::min(dist[c], (cloud.coords.col(c) - q).squaredNorm());
  };
  if (chosen.empty()) absorb(Point::Zero());
  for (int c : chosen) absorb(cloud.coords.col(c));
  while (static_cast<int>(chosen.size()) < m) {
    int best = -1;
    for (int c : candidates) {
      if (!used[c] && (best < 0 || dist[c] > dist[best])) best = c;
    }
    used[best] = 1;
    chosen.push_back(best);
    absorb(cloud.coords.col(best));
  }
  return chosen;
}

}  // namespace pipn
