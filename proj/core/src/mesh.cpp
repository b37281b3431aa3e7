#include "delayscape/mesh.hpp"

#include "delayscape/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace delayscape::mesh {

namespace {

std::uint64_t pack(std::size_t i, std::size_t j) {
    return (static_cast<std::uint64_t>(i) << 32) | static_cast<std::uint64_t>(j);
}

int corner_of(const std::array<std::size_t, 3>& face, std::size_t v) {
    for (int c = 0; c < 3; ++c) {
        if (face[c] == v) return c;
    }
    return -1;
}

void build_csr(std::size_t n, const std::vector<std::vector<std::size_t>>& lists, std::vector<std::size_t>& start,
               std::vector<std::size_t>& flat) {
    start.assign(n + 1, 0);
    flat.clear();
    for (std::size_t v = 0; v < n; ++v) {
        start[v] = flat.size();
        flat.insert(flat.end(), lists[v].begin(), lists[v].end());
    }
    start[n] = flat.size();
}

}  // namespace

HalfEdgeMesh HalfEdgeMesh::grid(int k, const Bounds& bounds) {
    if (k < 2) throw ValidationError("grid mesh needs k >= 2");
    if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0)) throw ValidationError("grid bounds must be non-empty");
    HalfEdgeMesh m;
    m.k_ = k;
    m.bounds_ = bounds;
    const double dx = bounds.width() / (k - 1);
    const double dy = bounds.height() / (k - 1);
    m.xy_.reserve(static_cast<std::size_t>(k) * k);
    for (int row = 0; row < k; ++row) {
        for (int col = 0; col < k; ++col) {
            // Pin the last row/column exactly on the bounds.
            const double x = col == k - 1 ? bounds.max_x : bounds.min_x + col * dx;
            const double y = row == k - 1 ? bounds.max_y : bounds.min_y + row * dy;
            m.xy_.push_back({x, y});
        }
    }
    m.z_.assign(m.xy_.size(), 0.0);

    for (int row = 0; row + 1 < k; ++row) {
        for (int col = 0; col + 1 < k; ++col) {
            const std::size_t a = m.grid_index(col, row);
            const std::size_t b = m.grid_index(col + 1, row);
            const std::size_t c = m.grid_index(col + 1, row + 1);
            const std::size_t d = m.grid_index(col, row + 1);
            m.faces_.push_back({a, b, c});
            m.faces_.push_back({a, c, d});
        }
    }

    m.half_edges_.resize(3 * m.faces_.size());
    for (std::size_t f = 0; f < m.faces_.size(); ++f) {
        for (int c = 0; c < 3; ++c) {
            auto& h = m.half_edges_[3 * f + c];
            h.from = m.faces_[f][c];
            h.to = m.faces_[f][(c + 1) % 3];
            h.face = f;
            m.half_edge_lookup_.emplace(pack(h.from, h.to), 3 * f + c);
        }
    }
    for (std::size_t h = 0; h < m.half_edges_.size(); ++h) {
        auto& he = m.half_edges_[h];
        if (auto it = m.half_edge_lookup_.find(pack(he.to, he.from)); it != m.half_edge_lookup_.end()) {
            he.twin = it->second;
        }
    }
    for (std::size_t h = 0; h < m.half_edges_.size(); ++h) {
        auto& he = m.half_edges_[h];
        if (he.twin != kNone && he.twin < h) continue;
        he.edge = m.edges_.size();
        if (he.twin != kNone) m.half_edges_[he.twin].edge = he.edge;
        m.edges_.push_back({he.from, he.to, h, he.twin});
    }

    const std::size_t n = m.xy_.size();
    m.boundary_vertex_.assign(n, 0);
    std::vector<std::vector<std::size_t>> vf(n), vn(n);
    for (std::size_t f = 0; f < m.faces_.size(); ++f) {
        for (std::size_t v : m.faces_[f]) vf[v].push_back(f);
    }
    for (const auto& e : m.edges_) {
        vn[e.a].push_back(e.b);
        vn[e.b].push_back(e.a);
        if (e.boundary()) {
            m.boundary_vertex_[e.a] = 1;
            m.boundary_vertex_[e.b] = 1;
        }
    }
    for (auto& list : vn) std::sort(list.begin(), list.end());
    build_csr(n, vf, m.vf_start_, m.vf_);
    build_csr(n, vn, m.vn_start_, m.vn_);
    return m;
}

double HalfEdgeMesh::longest_flat_edge() const { return std::hypot(pitch_x(), pitch_y()); }

std::size_t HalfEdgeMesh::boundary_half_edge_count() const {
    return static_cast<std::size_t>(
        std::count_if(half_edges_.begin(), half_edges_.end(), [](const HalfEdge& h) { return h.twin == kNone; }));
}

void HalfEdgeMesh::set_heights(std::span<const double> z) {
    if (z.size() != xy_.size()) throw ValidationError("height vector size does not match the mesh");
    z_.assign(z.begin(), z.end());
}

std::span<const std::size_t> HalfEdgeMesh::vertex_faces(std::size_t v) const {
    return {vf_.data() + vf_start_[v], vf_start_[v + 1] - vf_start_[v]};
}

std::span<const std::size_t> HalfEdgeMesh::vertex_neighbors(std::size_t v) const {
    return {vn_.data() + vn_start_[v], vn_start_[v + 1] - vn_start_[v]};
}

std::optional<std::size_t> HalfEdgeMesh::find_half_edge(std::size_t i, std::size_t j) const {
    auto it = half_edge_lookup_.find(pack(i, j));
    if (it == half_edge_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> HalfEdgeMesh::nxt(std::size_t i, std::size_t j) const {
    const auto h = find_half_edge(i, j);
    if (!h) return std::nullopt;
    const auto& face = faces_[*h / 3];
    return face[(*h % 3 + 2) % 3];
}

std::array<double, 3> HalfEdgeMesh::barycentric(std::size_t f, const geo::XY& p) const {
    const auto& a = xy_[faces_[f][0]];
    const auto& b = xy_[faces_[f][1]];
    const auto& c = xy_[faces_[f][2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    return {1.0 - l1 - l2, l1, l2};
}

std::optional<std::size_t> HalfEdgeMesh::locate(const geo::XY& p) const {
    const double tol = 1e-12 * std::max(bounds_.width(), bounds_.height());
    if (!(p.x >= bounds_.min_x - tol && p.x <= bounds_.max_x + tol && p.y >= bounds_.min_y - tol &&
          p.y <= bounds_.max_y + tol)) {
        return std::nullopt;
    }
    const double u = (p.x - bounds_.min_x) / pitch_x();
    const double v = (p.y - bounds_.min_y) / pitch_y();
    const int col = std::clamp(static_cast<int>(std::floor(u)), 0, k_ - 2);
    const int row = std::clamp(static_cast<int>(std::floor(v)), 0, k_ - 2);
    const double fu = u - col;
    const double fv = v - row;
    const std::size_t base = 2 * (static_cast<std::size_t>(row) * (k_ - 1) + col);
    return fv <= fu ? base : base + 1;
}

std::vector<std::size_t> HalfEdgeMesh::faces_containing(const geo::XY& p) const {
    std::vector<std::size_t> out;
    const auto home = locate(p);
    if (!home) return out;
    const int cell = static_cast<int>(*home / 2);
    const int col0 = cell % (k_ - 1);
    const int row0 = cell / (k_ - 1);
    for (int row = std::max(0, row0 - 1); row <= std::min(k_ - 2, row0 + 1); ++row) {
        for (int col = std::max(0, col0 - 1); col <= std::min(k_ - 2, col0 + 1); ++col) {
            for (std::size_t t = 0; t < 2; ++t) {
                const std::size_t f = 2 * (static_cast<std::size_t>(row) * (k_ - 1) + col) + t;
                const auto w = barycentric(f, p);
                if (w[0] >= -1e-12 && w[1] >= -1e-12 && w[2] >= -1e-12) out.push_back(f);
            }
        }
    }
    return out;
}

double HalfEdgeMesh::interpolate_height(const geo::XY& p, std::span<const double> z) const {
    const auto f = locate(p);
    if (!f) throw GeometryError("point outside the mesh domain");
    const auto w = barycentric(*f, p);
    const auto& face = faces_[*f];
    return w[0] * z[face[0]] + w[1] * z[face[1]] + w[2] * z[face[2]];
}

std::vector<double> init_sphere_cap(const HalfEdgeMesh& mesh, double apex_fraction) {
    if (!(apex_fraction > 0.0) || apex_fraction > 0.5) throw ValidationError("apex fraction must be in (0, 0.5]");
    const auto& b = mesh.bounds();
    const double cx = 0.5 * (b.min_x + b.max_x);
    const double cy = 0.5 * (b.min_y + b.max_y);
    const double h = apex_fraction * std::max(b.width(), b.height());
    const double rho = 0.5 * std::hypot(b.width(), b.height());
    const double radius = (rho * rho + h * h) / (2.0 * h);
    std::vector<double> z(mesh.vertex_count());
    for (std::size_t v = 0; v < z.size(); ++v) {
        const double dx = mesh.xy()[v].x - cx;
        const double dy = mesh.xy()[v].y - cy;
        const double inside = std::max(0.0, radius * radius - dx * dx - dy * dy);
        z[v] = std::max(0.0, std::sqrt(inside) - (radius - h));
    }
    return z;
}

FaceGeometry face_geometry(const HalfEdgeMesh& mesh, std::span<const double> z) {
    if (z.size() != mesh.vertex_count()) throw ValidationError("height vector size does not match the mesh");
    FaceGeometry g;
    const std::size_t nf = mesh.face_count();
    g.normal.resize(nf);
    g.area.resize(nf);
    g.cot.resize(3 * nf);
    g.vertex_area.assign(mesh.vertex_count(), 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
        const auto& face = mesh.faces()[f];
        const Vec3 vi = mesh.position(face[0], z);
        const Vec3 vj = mesh.position(face[1], z);
        const Vec3 vn = mesh.position(face[2], z);
        const Vec3 n = cross(vi - vn, vj - vn);
        const double area = 0.5 * norm(n);
        if (!(area >= kDegenerateArea)) throw GeometryError("degenerate triangle " + std::to_string(f));
        g.normal[f] = n;
        g.area[f] = area;
        g.total_area += area;
        for (int c = 0; c < 3; ++c) {
            const Vec3 a = mesh.position(face[c], z);
            const Vec3 b = mesh.position(face[(c + 1) % 3], z);
            const Vec3 o = mesh.position(face[(c + 2) % 3], z);
            g.cot[3 * f + c] = dot(a - o, b - o) / (2.0 * area);
            g.vertex_area[face[c]] += area / 3.0;
        }
    }
    return g;
}

SparseMatrix::SparseMatrix(std::size_t n, std::vector<std::array<double, 3>> triplets) : n_(n) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
        return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
    });
    row_start_.assign(n + 1, 0);
    std::size_t last_row = kNone;
    std::size_t last_col = kNone;
    for (const auto& t : triplets) {
        const auto row = static_cast<std::size_t>(t[0]);
        const auto col = static_cast<std::size_t>(t[1]);
        if (row == last_row && col == last_col) {
            vals_.back() += t[2];
            continue;
        }
        cols_.push_back(col);
        vals_.push_back(t[2]);
        ++row_start_[row + 1];
        last_row = row;
        last_col = col;
    }
    for (std::size_t i = 0; i < n; ++i) row_start_[i + 1] += row_start_[i];
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    const auto cols = row_columns(i);
    auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return vals_[row_start_[i] + static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t p = row_start_[i]; p < row_start_[i + 1]; ++p) acc += vals_[p] * x[cols_[p]];
        y[i] = acc;
    }
    return y;
}

double SparseMatrix::quadratic_form(std::span<const double> x) const {
    const auto y = multiply(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) acc += x[i] * y[i];
    return acc;
}

std::span<const std::size_t> SparseMatrix::row_columns(std::size_t i) const {
    return {cols_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
}

std::span<const double> SparseMatrix::row_values(std::size_t i) const {
    return {vals_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
}

LaplacianPair laplacians(const HalfEdgeMesh& mesh, const FaceGeometry& geometry) {
    LaplacianPair lp;
    const std::size_t n = mesh.vertex_count();
    lp.edge_weight.resize(mesh.edge_count());
    std::vector<std::array<double, 3>> tn, td;
    tn.reserve(4 * mesh.edge_count() + n);
    td.reserve(4 * mesh.edge_count() + n);
    std::vector<double> diag_n(n, 0.0), diag_d(n, 0.0);
    for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
        const auto& edge = mesh.edges()[e];
        double w = 0.5 * geometry.cot[edge.half_edge];
        if (!edge.boundary()) w += 0.5 * geometry.cot[edge.twin];
        lp.edge_weight[e] = w;
        const auto a = static_cast<double>(edge.a);
        const auto b = static_cast<double>(edge.b);
        tn.push_back({a, b, w});
        tn.push_back({b, a, w});
        diag_n[edge.a] -= w;
        diag_n[edge.b] -= w;
        if (!mesh.is_boundary_vertex(edge.a) && !mesh.is_boundary_vertex(edge.b)) {
            td.push_back({a, b, w});
            td.push_back({b, a, w});
            diag_d[edge.a] -= w;
            diag_d[edge.b] -= w;
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
        tn.push_back({static_cast<double>(v), static_cast<double>(v), diag_n[v]});
        if (!mesh.is_boundary_vertex(v)) td.push_back({static_cast<double>(v), static_cast<double>(v), diag_d[v]});
    }
    lp.neumann = SparseMatrix(n, std::move(tn));
    lp.dirichlet = SparseMatrix(n, std::move(td));
    return lp;
}

namespace {

double corner_angle(double cot) { return std::atan2(1.0, cot); }

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

VertexCurvatures vertex_curvatures(const HalfEdgeMesh& mesh, std::span<const double> z,
                                   const FaceGeometry& geometry) {
    const std::size_t n = mesh.vertex_count();
    VertexCurvatures k;
    k.angle_defect.resize(n);
    k.gaussian.resize(n);
    k.mean_normal.resize(n);
    k.vertex_normal.resize(n);
    k.mean.resize(n);
    k.kplus.resize(n);
    k.kminus.resize(n);
    k.clamped.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 vi = mesh.position(i, z);
        double defect = mesh.is_boundary_vertex(i) ? std::numbers::pi : 2.0 * std::numbers::pi;
        Vec3 y{};
        Vec3 normal{};
        for (std::size_t f : mesh.vertex_faces(i)) {
            const auto& face = mesh.faces()[f];
            const int c = corner_of(face, i);
            const std::size_t j = face[(c + 1) % 3];
            const std::size_t o = face[(c + 2) % 3];
            defect -= corner_angle(geometry.corner_cot(f, c));
            // Half-edge i -> j has its angle at o; half-edge o -> i has its angle at j.
            const double cot_o = geometry.cot[3 * f + c];
            const double cot_j = geometry.cot[3 * f + (c + 2) % 3];
            y += 0.5 * cot_o * (mesh.position(j, z) - vi);
            y += 0.5 * cot_j * (mesh.position(o, z) - vi);
            normal += geometry.normal[f];
        }
        const double area = geometry.vertex_area[i];
        k.angle_defect[i] = defect;
        k.gaussian[i] = defect / area;
        k.mean_normal[i] = y * (-0.5 / area);
        k.vertex_normal[i] = normal;
        k.mean[i] = sign(dot(normal, k.mean_normal[i])) * norm(k.mean_normal[i]);
        const double disc = k.mean[i] * k.mean[i] - k.gaussian[i];
        const double root = disc > 0.0 ? std::sqrt(disc) : 0.0;
        k.clamped[i] = disc > 0.0 ? 0 : 1;
        k.kplus[i] = k.mean[i] + root;
        k.kminus[i] = k.mean[i] - root;
    }
    return k;
}

SurfaceState evaluate_surface(const HalfEdgeMesh& mesh, std::span<const double> z) {
    SurfaceState s;
    s.geometry = face_geometry(mesh, z);
    s.laplacians = laplacians(mesh, s.geometry);
    s.curvatures = vertex_curvatures(mesh, z, s.geometry);
    return s;
}

namespace {

FacePartial face_partial(const HalfEdgeMesh& mesh, std::span<const double> z, const FaceGeometry& g,
                         std::size_t f, std::size_t ell) {
    FacePartial fp;
    fp.face = f;
    const auto& face = mesh.faces()[f];
    const Vec3 vi = mesh.position(face[0], z);
    const Vec3 vj = mesh.position(face[1], z);
    const Vec3 vn = mesh.position(face[2], z);
    if (ell == face[0]) {
        fp.d_normal = cross(vn - vj, kUnitZ);
    } else if (ell == face[1]) {
        fp.d_normal = cross(vi - vn, kUnitZ);
    } else if (ell == face[2]) {
        fp.d_normal = cross(vj - vi, kUnitZ);
    }
    const double area = g.area[f];
    fp.d_area = dot(g.normal[f], fp.d_normal) / (4.0 * area);
    for (int c = 0; c < 3; ++c) {
        const std::size_t a = face[c];
        const std::size_t b = face[(c + 1) % 3];
        const std::size_t o = face[(c + 2) % 3];
        const Vec3 pa = mesh.position(a, z);
        const Vec3 pb = mesh.position(b, z);
        const Vec3 po = mesh.position(o, z);
        double lead = 0.0;
        if (ell == a) {
            lead = (pb - po).z;
        } else if (ell == b) {
            lead = (pa - po).z;
        } else if (ell == o) {
            lead = (2.0 * po - pa - pb).z;
        }
        const double cot = g.cot[3 * f + c];
        fp.d_cot[c] = (lead - 2.0 * cot * fp.d_area) / (2.0 * area);
    }
    return fp;
}

}  // namespace

HeightPartials curvature_partials(const HalfEdgeMesh& mesh, std::span<const double> z, const SurfaceState& state,
                                  std::size_t ell, bool with_laplacian) {
    const auto& g = state.geometry;
    const auto& k = state.curvatures;
    HeightPartials out;
    out.height_index = ell;
    for (std::size_t f : mesh.vertex_faces(ell)) out.faces.push_back(face_partial(mesh, z, g, f, ell));

    auto find_face = [&](std::size_t f) -> const FacePartial* {
        for (const auto& fp : out.faces) {
            if (fp.face == f) return &fp;
        }
        return nullptr;
    };

    auto vertex_partial = [&](std::size_t i) {
        VertexPartial vp;
        vp.vertex = i;
        const Vec3 vi = mesh.position(i, z);
        Vec3 y{};
        Vec3 dy{};
        for (std::size_t f : mesh.vertex_faces(i)) {
            const auto& face = mesh.faces()[f];
            const int c = corner_of(face, i);
            const std::size_t j = face[(c + 1) % 3];
            const std::size_t o = face[(c + 2) % 3];
            const double cot_o = g.cot[3 * f + c];
            const double cot_j = g.cot[3 * f + (c + 2) % 3];
            const Vec3 ej = mesh.position(j, z) - vi;
            const Vec3 eo = mesh.position(o, z) - vi;
            y += 0.5 * cot_o * ej;
            y += 0.5 * cot_j * eo;
            const FacePartial* fp = find_face(f);
            if (fp == nullptr) continue;
            vp.d_vertex_area += fp->d_area / 3.0;
            vp.d_vertex_normal += fp->d_normal;
            const double cot_i = g.corner_cot(f, c);
            const double d_cot_i = fp->d_cot[(c + 1) % 3];
            // d(theta) = -d(cot) / (1 + cot^2); the defect subtracts theta.
            vp.d_angle_defect += d_cot_i / (1.0 + cot_i * cot_i);
            const double dz_i = (i == ell) ? 1.0 : 0.0;
            const Vec3 d_ej = kUnitZ * (((j == ell) ? 1.0 : 0.0) - dz_i);
            const Vec3 d_eo = kUnitZ * (((o == ell) ? 1.0 : 0.0) - dz_i);
            dy += 0.5 * (fp->d_cot[c] * ej + cot_o * d_ej);
            dy += 0.5 * (fp->d_cot[(c + 2) % 3] * eo + cot_j * d_eo);
        }
        const double area = g.vertex_area[i];
        vp.d_gaussian = (vp.d_angle_defect - vp.d_vertex_area * k.gaussian[i]) / area;
        vp.d_mean_normal = (dy - y * (vp.d_vertex_area / area)) * (-0.5 / area);
        const double len = norm(k.mean_normal[i]);
        if (len > 0.0) {
            vp.d_mean = sign(dot(k.vertex_normal[i], k.mean_normal[i])) * dot(k.mean_normal[i], vp.d_mean_normal) / len;
        }
        if (k.clamped[i]) {
            vp.d_kplus = vp.d_mean;
            vp.d_kminus = vp.d_mean;
        } else {
            const double spread = k.kplus[i] - k.kminus[i];
            vp.d_kplus = (2.0 * k.kplus[i] * vp.d_mean - vp.d_gaussian) / spread;
            vp.d_kminus = (vp.d_gaussian - 2.0 * k.kminus[i] * vp.d_mean) / spread;
        }
        return vp;
    };

    out.vertices.push_back(vertex_partial(ell));
    for (std::size_t i : mesh.vertex_neighbors(ell)) out.vertices.push_back(vertex_partial(i));
    std::sort(out.vertices.begin(), out.vertices.end(),
              [](const VertexPartial& a, const VertexPartial& b) { return a.vertex < b.vertex; });

    if (with_laplacian) {
        std::vector<std::array<double, 4>> entries;  // row, col, dN, dD
        auto add = [&](std::size_t r, std::size_t c, double dn, double dd) {
            for (auto& e : entries) {
                if (e[0] == static_cast<double>(r) && e[1] == static_cast<double>(c)) {
                    e[2] += dn;
                    e[3] += dd;
                    return;
                }
            }
            entries.push_back({static_cast<double>(r), static_cast<double>(c), dn, dd});
        };
        for (const auto& fp : out.faces) {
            const auto& face = mesh.faces()[fp.face];
            for (int c = 0; c < 3; ++c) {
                const std::size_t a = face[c];
                const std::size_t b = face[(c + 1) % 3];
                const double dw = 0.5 * fp.d_cot[c];
                const bool interior = !mesh.is_boundary_vertex(a) && !mesh.is_boundary_vertex(b);
                const double dd = interior ? dw : 0.0;
                add(a, b, dw, dd);
                add(b, a, dw, dd);
                add(a, a, -dw, -dd);
                add(b, b, -dw, -dd);
            }
        }
        std::sort(entries.begin(), entries.end());
        for (const auto& e : entries) {
            out.laplacian.push_back(
                {static_cast<std::size_t>(e[0]), static_cast<std::size_t>(e[1]), e[2], e[3]});
        }
    }
    return out;
}

}  // namespace delayscape::mesh
