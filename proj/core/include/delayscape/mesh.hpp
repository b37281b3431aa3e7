#pragma once

#include "delayscape/geo.hpp"
#include "delayscape/vec3.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace delayscape::mesh {

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
/// Triangles with area below this (normalized units) are rejected.
inline constexpr double kDegenerateArea = 1e-15;

struct Bounds {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 1.0;
    double max_y = 1.0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    bool operator==(const Bounds&) const = default;
};

/// Directed edge of a counterclockwise face. Half-edge `3f + c` runs from
/// corner c to corner c + 1 of face f; the opposite corner is `nxt(from, to)`.
struct HalfEdge {
    std::size_t from = kNone;
    std::size_t to = kNone;
    std::size_t face = kNone;
    std::size_t twin = kNone;  ///< kNone on the boundary
    std::size_t edge = kNone;  ///< undirected edge index
};

struct Edge {
    std::size_t a = kNone;
    std::size_t b = kNone;
    std::size_t half_edge = kNone;  ///< a -> b
    std::size_t twin = kNone;       ///< b -> a, kNone on the boundary
    bool boundary() const { return twin == kNone; }
};

/// Doubly-connected edge list over a k x k grid with fixed xy and free heights.
///
/// Interior edges carry a twin pair of half-edges; boundary edges carry only
/// the half-edge that belongs to their face.
class HalfEdgeMesh {
public:
    /// Uniform k x k grid over `bounds`; each cell is split along the
    /// (i, j)-(i+1, j+1) diagonal. Heights start at zero. Throws ValidationError for k < 2.
    static HalfEdgeMesh grid(int k, const Bounds& bounds);

    int k() const { return k_; }
    const Bounds& bounds() const { return bounds_; }
    double pitch_x() const { return bounds_.width() / (k_ - 1); }
    double pitch_y() const { return bounds_.height() / (k_ - 1); }
    /// Longest edge of the flat mesh (the cell diagonal).
    double longest_flat_edge() const;

    std::size_t vertex_count() const { return xy_.size(); }
    std::size_t face_count() const { return faces_.size(); }
    std::size_t half_edge_count() const { return half_edges_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    std::size_t boundary_half_edge_count() const;

    const std::vector<geo::XY>& xy() const { return xy_; }
    const std::vector<std::array<std::size_t, 3>>& faces() const { return faces_; }
    const std::vector<HalfEdge>& half_edges() const { return half_edges_; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::vector<double>& heights() { return z_; }
    const std::vector<double>& heights() const { return z_; }
    void set_heights(std::span<const double> z);

    Vec3 position(std::size_t v, std::span<const double> z) const { return {xy_[v].x, xy_[v].y, z[v]}; }
    Vec3 position(std::size_t v) const { return position(v, z_); }

    bool is_boundary_vertex(std::size_t v) const { return boundary_vertex_[v] != 0; }
    /// Faces incident to v, in increasing index order.
    std::span<const std::size_t> vertex_faces(std::size_t v) const;
    /// Vertices adjacent to v, in increasing index order.
    std::span<const std::size_t> vertex_neighbors(std::size_t v) const;

    /// Half-edge i -> j, if present.
    std::optional<std::size_t> find_half_edge(std::size_t i, std::size_t j) const;
    /// Opposite vertex of half-edge i -> j; nullopt when the half-edge does not exist.
    std::optional<std::size_t> nxt(std::size_t i, std::size_t j) const;

    /// Face whose closed triangle contains `p`, or nullopt outside the domain.
    std::optional<std::size_t> locate(const geo::XY& p) const;
    /// All faces whose closed triangle contains `p` (within a small tolerance).
    std::vector<std::size_t> faces_containing(const geo::XY& p) const;
    /// Barycentric coordinates of `p` in face f.
    std::array<double, 3> barycentric(std::size_t f, const geo::XY& p) const;
    double interpolate_height(const geo::XY& p, std::span<const double> z) const;

    std::size_t grid_index(int col, int row) const { return static_cast<std::size_t>(row) * k_ + col; }

private:
    int k_ = 0;
    Bounds bounds_;
    std::vector<geo::XY> xy_;
    std::vector<double> z_;
    std::vector<std::array<std::size_t, 3>> faces_;
    std::vector<HalfEdge> half_edges_;
    std::vector<Edge> edges_;
    std::vector<char> boundary_vertex_;
    std::vector<std::size_t> vf_start_, vf_;
    std::vector<std::size_t> vn_start_, vn_;
    std::unordered_map<std::uint64_t, std::size_t> half_edge_lookup_;
};

/// Sphere-cap heights over the grid's circumscribing disk: apex at the domain
/// center with height `apex_fraction * max(width, height)`, zero at the corners.
std::vector<double> init_sphere_cap(const HalfEdgeMesh& mesh, double apex_fraction = 0.1);

struct FaceGeometry {
    std::vector<Vec3> normal;         ///< per face: (v_i - v_n) x (v_j - v_n), length 2A
    std::vector<double> area;         ///< per face
    std::vector<double> cot;          ///< per half-edge: cotangent of the angle opposite it
    std::vector<double> vertex_area;  ///< D_ii: one third of the incident face areas
    double total_area = 0.0;          ///< sum over faces, each triangle once

    /// Cotangent of the interior angle at corner c of face f.
    double corner_cot(std::size_t f, int c) const { return cot[3 * f + (c + 1) % 3]; }
};

/// Throws GeometryError on a degenerate triangle.
FaceGeometry face_geometry(const HalfEdgeMesh& mesh, std::span<const double> z);

/// Compressed-row sparse matrix.
class SparseMatrix {
public:
    SparseMatrix() = default;
    /// Builds from (row, col, value) triplets; duplicates are summed.
    SparseMatrix(std::size_t n, std::vector<std::array<double, 3>> triplets);

    std::size_t size() const { return n_; }
    double at(std::size_t i, std::size_t j) const;
    std::vector<double> multiply(std::span<const double> x) const;
    double quadratic_form(std::span<const double> x) const;
    std::span<const std::size_t> row_columns(std::size_t i) const;
    std::span<const double> row_values(std::size_t i) const;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_start_;
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
};

/// Cotangent Laplacians with diagonal = -(sum of off-diagonals), i.e. negative semidefinite.
struct LaplacianPair {
    SparseMatrix neumann;
    SparseMatrix dirichlet;
    /// Off-diagonal weight per undirected edge: (cot + twin cot) / 2, or cot / 2 on the boundary.
    std::vector<double> edge_weight;
};

LaplacianPair laplacians(const HalfEdgeMesh& mesh, const FaceGeometry& geometry);

struct VertexCurvatures {
    std::vector<double> angle_defect;  ///< 2pi (interior) or pi (boundary) minus incident angles
    std::vector<double> gaussian;      ///< angle_defect / vertex area
    std::vector<Vec3> mean_normal;     ///< -(1/2) D^-1 L_N v
    std::vector<Vec3> vertex_normal;   ///< sum of incident face normals
    std::vector<double> mean;          ///< signed |mean_normal|
    std::vector<double> kplus;
    std::vector<double> kminus;
    std::vector<char> clamped;         ///< discriminant (mean^2 - gaussian) clamped at zero
};

VertexCurvatures vertex_curvatures(const HalfEdgeMesh& mesh, std::span<const double> z,
                                   const FaceGeometry& geometry);

/// Geometry, Laplacians and curvatures for one height vector.
struct SurfaceState {
    FaceGeometry geometry;
    LaplacianPair laplacians;
    VertexCurvatures curvatures;
};

SurfaceState evaluate_surface(const HalfEdgeMesh& mesh, std::span<const double> z);

struct FacePartial {
    std::size_t face = kNone;
    Vec3 d_normal;
    double d_area = 0.0;
    std::array<double, 3> d_cot{};  ///< per half-edge 3f + c
};

struct VertexPartial {
    std::size_t vertex = kNone;
    double d_vertex_area = 0.0;
    double d_angle_defect = 0.0;
    double d_gaussian = 0.0;
    Vec3 d_mean_normal;
    Vec3 d_vertex_normal;
    double d_mean = 0.0;
    double d_kplus = 0.0;
    double d_kminus = 0.0;
};

struct LaplacianPartial {
    std::size_t row = kNone;
    std::size_t col = kNone;
    double d_neumann = 0.0;
    double d_dirichlet = 0.0;
};

/// Nonzero partial derivatives of every surface quantity with respect to one height.
struct HeightPartials {
    std::size_t height_index = kNone;
    std::vector<FacePartial> faces;        ///< faces containing the vertex
    std::vector<VertexPartial> vertices;   ///< closed one-ring of the vertex
    std::vector<LaplacianPartial> laplacian;  ///< filled only when requested
};

/// Forward-mode partials with respect to z_ell, following the chain rule through
/// normals, areas, cotangents, vertex areas, Laplacians and curvatures. At clamped
/// principal-curvature discriminants the square-root term is dropped.
HeightPartials curvature_partials(const HalfEdgeMesh& mesh, std::span<const double> z, const SurfaceState& state,
                                  std::size_t ell, bool with_laplacian = false);

}  // namespace delayscape::mesh
