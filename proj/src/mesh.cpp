#include "fembem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <unordered_map>
#include <iomanip>

#include "fembem/errors.hpp"

namespace fembem {

namespace {

long long edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<long long>(a) << 32) | static_cast<unsigned int>(b);
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

}  // namespace

std::size_t Mesh2D::count(Region r) const {
    return static_cast<std::size_t>(std::count(region.begin(), region.end(), r));
}

Mesh2D make_mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                 std::vector<Region> region) {
    if (region.size() != triangles.size()) throw StructuralError("make_mesh: region tag count mismatch");
    const int nv = static_cast<int>(vertices.size());
    for (auto& t : triangles) {
        for (int v : t)
            if (v < 0 || v >= nv) throw StructuralError("make_mesh: vertex index out of range");
        if (signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) < 0) std::swap(t[0], t[1]);
        // rotate so that the longest edge comes first; ties resolved by position
        int best = 0;
        double best_len = -1.0;
        for (int i = 0; i < 3; ++i) {
            double len = (vertices[t[(i + 1) % 3]] - vertices[t[i]]).squaredNorm();
            if (len > best_len * (1.0 + 1e-12)) {
                best_len = len;
                best = i;
            }
        }
        t = {t[best], t[(best + 1) % 3], t[(best + 2) % 3]};
    }
    Mesh2D m;
    m.vertices = std::move(vertices);
    m.triangles = std::move(triangles);
    m.region = std::move(region);
    m.generation.assign(m.triangles.size(), 0);
    m.vertex_parents.assign(m.vertices.size(), {-1, -1});
    check_conforming(m);
    return m;
}

double triangle_area(const Mesh2D& mesh, int t) {
    const auto& T = mesh.triangles[t];
    return signed_area(mesh.vertices[T[0]], mesh.vertices[T[1]], mesh.vertices[T[2]]);
}

double triangle_diameter(const Mesh2D& mesh, int t) {
    const auto& T = mesh.triangles[t];
    double d = 0.0;
    for (int i = 0; i < 3; ++i) d = std::max(d, (mesh.vertices[T[i]] - mesh.vertices[T[(i + 1) % 3]]).norm());
    return d;
}

Vec2 triangle_centroid(const Mesh2D& mesh, int t) {
    const auto& T = mesh.triangles[t];
    return (mesh.vertices[T[0]] + mesh.vertices[T[1]] + mesh.vertices[T[2]]) / 3.0;
}

Eigen::Matrix<double, 2, 3> barycentric_gradients(const Mesh2D& mesh, int t) {
    const auto& T = mesh.triangles[t];
    const Vec2& a = mesh.vertices[T[0]];
    const Vec2& b = mesh.vertices[T[1]];
    const Vec2& c = mesh.vertices[T[2]];
    double twice = 2.0 * signed_area(a, b, c);
    if (!(twice > 0.0)) throw StructuralError("degenerate triangle " + std::to_string(t));
    Eigen::Matrix<double, 2, 3> G;
    // grad lambda_i = rot(opposite edge) / (2|T|)
    G.col(0) = Vec2(b.y() - c.y(), c.x() - b.x()) / twice;
    G.col(1) = Vec2(c.y() - a.y(), a.x() - c.x()) / twice;
    G.col(2) = Vec2(a.y() - b.y(), b.x() - a.x()) / twice;
    return G;
}

double shape_regularity(const Mesh2D& mesh) {
    double s = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        double d = triangle_diameter(mesh, static_cast<int>(t));
        s = std::max(s, d * d / triangle_area(mesh, static_cast<int>(t)));
    }
    return s;
}

void check_conforming(const Mesh2D& mesh) {
    struct Use {
        int count = 0;
        int first_from = -1;
    };
    std::unordered_map<long long, Use> uses;
    uses.reserve(mesh.triangles.size() * 2);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& T = mesh.triangles[t];
        if (!(triangle_area(mesh, static_cast<int>(t)) > 0.0))
            throw StructuralError("triangle " + std::to_string(t) + " is not positively oriented");
        for (int i = 0; i < 3; ++i) {
            int a = T[i], b = T[(i + 1) % 3];
            Use& u = uses[edge_key(a, b)];
            if (u.count == 0) {
                u.first_from = a;
            } else if (u.count == 1) {
                if (u.first_from == a) throw StructuralError("edge traversed twice in the same direction");
            } else {
                throw StructuralError("edge shared by more than two triangles");
            }
            ++u.count;
        }
    }
    std::map<std::pair<double, double>, int> where;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        where.emplace(std::make_pair(mesh.vertices[v].x(), mesh.vertices[v].y()), static_cast<int>(v));
    for (const auto& [key, u] : uses) {
        if (u.count != 1) continue;
        int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffff);
        Vec2 m = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
        if (where.count({m.x(), m.y()})) throw StructuralError("hanging node on edge");
    }
}

int MeshTopology::find_edge(int a, int b) const {
    for (int t : vertex_triangles[a]) {
        for (int e : triangle_edges[t]) {
            const Edge& E = edges[e];
            if ((E[0] == a && E[1] == b) || (E[0] == b && E[1] == a)) return e;
        }
    }
    return -1;
}

MeshTopology build_topology(const Mesh2D& mesh) {
    MeshTopology topo;
    const int nt = static_cast<int>(mesh.triangles.size());
    topo.triangle_edges.resize(nt);
    topo.vertex_triangles.assign(mesh.vertices.size(), {});
    std::unordered_map<long long, int> index;
    index.reserve(nt * 2);
    for (int t = 0; t < nt; ++t) {
        const auto& T = mesh.triangles[t];
        for (int v : T) topo.vertex_triangles[v].push_back(t);
        for (int i = 0; i < 3; ++i) {
            int a = T[(i + 1) % 3], b = T[(i + 2) % 3];
            auto [it, inserted] = index.emplace(edge_key(a, b), static_cast<int>(topo.edges.size()));
            if (inserted) {
                topo.edges.push_back({std::min(a, b), std::max(a, b)});
                topo.edge_triangles.push_back({t, -1});
            } else {
                topo.edge_triangles[it->second][1] = t;
            }
            topo.triangle_edges[t][i] = it->second;
        }
    }
    return topo;
}

Mesh2D refine_nvb(const Mesh2D& mesh, const std::vector<int>& marked) {
    const int nt = static_cast<int>(mesh.triangles.size());
    for (int t : marked)
        if (t < 0 || t >= nt) throw StructuralError("refine_nvb: marked triangle out of range");
    if (marked.empty()) return mesh;
    check_conforming(mesh);
    MeshTopology topo = build_topology(mesh);
    std::vector<char> edge_marked(topo.edges.size(), 0);
    std::vector<int> work;
    auto mark_ref = [&](int t) {
        int e = topo.triangle_edges[t][2];
        if (edge_marked[e]) return;
        edge_marked[e] = 1;
        for (int s : topo.edge_triangles[e])
            if (s >= 0) work.push_back(s);
    };
    for (int t : marked) mark_ref(t);
    // closure: a triangle with any marked edge must bisect its refinement edge
    while (!work.empty()) {
        int t = work.back();
        work.pop_back();
        for (int e : topo.triangle_edges[t])
            if (edge_marked[e]) {
                mark_ref(t);
                break;
            }
    }

    Mesh2D out;
    out.vertices = mesh.vertices;
    out.vertex_parents = mesh.vertex_parents;
    std::vector<int> midpoint(topo.edges.size(), -1);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        if (!edge_marked[e]) continue;
        const Edge& E = topo.edges[e];
        midpoint[e] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(0.5 * (mesh.vertices[E[0]] + mesh.vertices[E[1]]));
        out.vertex_parents.push_back({E[0], E[1]});
    }
    auto mid_of = [&](int a, int b) -> int {
        if (a >= static_cast<int>(mesh.vertices.size()) || b >= static_cast<int>(mesh.vertices.size())) return -1;
        int e = topo.find_edge(a, b);
        return e >= 0 ? midpoint[e] : -1;
    };
    out.triangles.reserve(nt * 2);
    auto emit = [&](std::array<int, 3> T, Region r, int gen, auto&& self) -> void {
        int m = mid_of(T[0], T[1]);
        if (m < 0) {
            out.triangles.push_back(T);
            out.region.push_back(r);
            out.generation.push_back(gen);
            return;
        }
        self(std::array<int, 3>{T[2], T[0], m}, r, gen + 1, self);
        self(std::array<int, 3>{T[1], T[2], m}, r, gen + 1, self);
    };
    for (int t = 0; t < nt; ++t) emit(mesh.triangles[t], mesh.region[t], mesh.generation[t], emit);
    return out;
}

SubMesh submesh(const Mesh2D& mesh, Region region) {
    SubMesh s;
    std::vector<int> local(mesh.vertices.size(), -1);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        if (mesh.region[t] != region) continue;
        for (int v : mesh.triangles[t]) local[v] = 0;
    }
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (local[v] < 0) continue;
        local[v] = static_cast<int>(s.vertex_map.size());
        s.vertex_map.push_back(static_cast<int>(v));
        s.mesh.vertices.push_back(mesh.vertices[v]);
    }
    for (int v : s.vertex_map) {
        auto p = mesh.vertex_parents[v];
        if (p[0] >= 0 && local[p[0]] >= 0 && local[p[1]] >= 0)
            s.mesh.vertex_parents.push_back({local[p[0]], local[p[1]]});
        else
            s.mesh.vertex_parents.push_back({-1, -1});
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        if (mesh.region[t] != region) continue;
        const auto& T = mesh.triangles[t];
        s.mesh.triangles.push_back({local[T[0]], local[T[1]], local[T[2]]});
        s.mesh.region.push_back(region);
        s.mesh.generation.push_back(mesh.generation[t]);
        s.triangle_map.push_back(static_cast<int>(t));
    }
    return s;
}

double BoundaryMesh::diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j) d = std::max(d, (points[i] - points[j]).norm());
    return d;
}

BoundaryMesh boundary_mesh(const Mesh2D& mesh, Region region) {
    MeshTopology topo = build_topology(mesh);
    struct Directed {
        int to;
        int tri;
    };
    std::map<int, Directed> from;
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        auto tt = topo.edge_triangles[e];
        bool in0 = tt[0] >= 0 && mesh.region[tt[0]] == region;
        bool in1 = tt[1] >= 0 && mesh.region[tt[1]] == region;
        if (in0 == in1) continue;
        int t = in0 ? tt[0] : tt[1];
        const auto& T = mesh.triangles[t];
        int a = -1, b = -1;
        for (int i = 0; i < 3; ++i) {
            int p = T[i], q = T[(i + 1) % 3];
            if ((p == topo.edges[e][0] && q == topo.edges[e][1]) || (p == topo.edges[e][1] && q == topo.edges[e][0])) {
                a = p;
                b = q;
            }
        }
        if (!from.emplace(a, Directed{b, t}).second)
            throw GeometryError("boundary_mesh: boundary touches itself at a vertex");
    }
    if (from.size() < 3) throw GeometryError("boundary_mesh: no closed boundary found");
    BoundaryMesh bm;
    int start = from.begin()->first;
    int cur = start;
    do {
        auto it = from.find(cur);
        if (it == from.end()) throw GeometryError("boundary_mesh: boundary is not closed");
        bm.points.push_back(mesh.vertices[cur]);
        bm.node_vertex.push_back(cur);
        bm.parent.push_back(it->second.tri);
        cur = it->second.to;
        if (bm.points.size() > from.size()) throw GeometryError("boundary_mesh: boundary is not a simple curve");
    } while (cur != start);
    if (bm.points.size() != from.size())
        throw GeometryError("boundary_mesh: boundary is not a single closed curve");
    return bm;
}

BoundaryMesh subdivide(const BoundaryMesh& bmesh, int m) {
    if (m < 1) throw ConfigError("subdivide: factor must be >= 1");
    if (m == 1) return bmesh;
    BoundaryMesh out;
    for (std::size_t i = 0; i < bmesh.size(); ++i) {
        for (int j = 0; j < m; ++j) {
            out.points.push_back(bmesh.point(static_cast<int>(i), static_cast<double>(j) / m));
            out.node_vertex.push_back(j == 0 ? bmesh.node_vertex[i] : -1);
            out.parent.push_back(bmesh.parent[i]);
        }
    }
    return out;
}

Patch k_patch(const Mesh2D& mesh, const MeshTopology& topo, int seed, int k, const std::vector<char>& allowed) {
    if (k < 1) throw ConfigError("k_patch: k must be >= 1");
    if (seed < 0 || seed >= static_cast<int>(mesh.vertices.size())) throw ConfigError("k_patch: bad seed vertex");
    auto ok = [&](int t) { return allowed.empty() || allowed[t]; };
    std::vector<int> tris;
    for (int t : topo.vertex_triangles[seed])
        if (ok(t)) tris.push_back(t);
    std::sort(tris.begin(), tris.end());
    for (int level = 2; level <= k; ++level) {
        std::vector<int> verts;
        for (int t : tris)
            for (int v : mesh.triangles[t]) verts.push_back(v);
        std::sort(verts.begin(), verts.end());
        verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
        std::vector<int> next;
        for (int v : verts)
            for (int t : topo.vertex_triangles[v])
                if (ok(t)) next.push_back(t);
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        tris.swap(next);
    }
    Patch p;
    p.seed = seed;
    p.k = k;
    p.triangles = tris;
    for (int t : tris)
        for (int v : mesh.triangles[t]) p.vertices.push_back(v);
    std::sort(p.vertices.begin(), p.vertices.end());
    p.vertices.erase(std::unique(p.vertices.begin(), p.vertices.end()), p.vertices.end());
    return p;
}

Patch k_patch(const Mesh2D& mesh, int seed, int k) { return k_patch(mesh, build_topology(mesh), seed, k); }

int locate(const Mesh2D& mesh, const Vec2& point) {
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& T = mesh.triangles[t];
        double area = triangle_area(mesh, static_cast<int>(t));
        double tol = -1e-12 * area;
        if (signed_area(point, mesh.vertices[T[1]], mesh.vertices[T[2]]) >= tol &&
            signed_area(mesh.vertices[T[0]], point, mesh.vertices[T[2]]) >= tol &&
            signed_area(mesh.vertices[T[0]], mesh.vertices[T[1]], point) >= tol)
            return static_cast<int>(t);
    }
    return -1;
}

double hat_function_eval(const Mesh2D& mesh, int vertex, const Vec2& point) {
    int t = locate(mesh, point);
    if (t < 0) throw DomainError("hat_function_eval: point outside mesh");
    const auto& T = mesh.triangles[t];
    double area = triangle_area(mesh, t);
    for (int i = 0; i < 3; ++i) {
        if (T[i] != vertex) continue;
        const Vec2& b = mesh.vertices[T[(i + 1) % 3]];
        const Vec2& c = mesh.vertices[T[(i + 2) % 3]];
        return std::clamp(signed_area(point, b, c) / area, 0.0, 1.0);
    }
    return 0.0;
}

void write_mesh(const Mesh2D& mesh, std::ostream& os) {
    os << std::setprecision(17);
    for (const auto& v : mesh.vertices) os << v.x() << ' ' << v.y() << '\n';
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& T = mesh.triangles[t];
        os << T[0] << ' ' << T[1] << ' ' << T[2] << ' ' << static_cast<int>(mesh.region[t]) << '\n';
    }
}

Mesh2D criss_cross(double x0, double x1, double y0, double y1, int nx, int ny) {
    if (nx < 1 || ny < 1) throw ConfigError("criss_cross: need at least one cell");
    std::vector<Vec2> v;
    auto node = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) v.emplace_back(x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny);
    std::vector<std::array<int, 3>> tris;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int c = static_cast<int>(v.size());
            v.push_back(0.25 * (v[node(i, j)] + v[node(i + 1, j)] + v[node(i + 1, j + 1)] + v[node(i, j + 1)]));
            int p00 = node(i, j), p10 = node(i + 1, j), p11 = node(i + 1, j + 1), p01 = node(i, j + 1);
            tris.push_back({p00, p10, c});
            tris.push_back({p10, p11, c});
            tris.push_back({p11, p01, c});
            tris.push_back({p01, p00, c});
        }
    std::vector<Region> reg(tris.size(), Region::Interior);
    return make_mesh(std::move(v), std::move(tris), std::move(reg));
}

}  // namespace fembem
