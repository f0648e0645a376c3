#pragma once

#include <array>
#include <iosfwd>
#include <vector>

#include "fembem/numerics.hpp"

namespace fembem {

enum class Region : int { Interior = 0, Strip = 1 };

// Triangle (a, b, c): refinement edge is (a, b), c is the newest vertex.
// Triangles are positively oriented.
struct Mesh2D {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Region> region;
    std::vector<int> generation;
    // Endpoints of the bisected edge that created each vertex; {-1,-1} for initial vertices.
    std::vector<std::array<int, 2>> vertex_parents;

    std::size_t num_vertices() const { return vertices.size(); }
    std::size_t num_triangles() const { return triangles.size(); }
    std::size_t count(Region r) const;
};

// Orients triangles counterclockwise, puts the longest edge first and validates conformity.
Mesh2D make_mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles,
                 std::vector<Region> region);

double triangle_area(const Mesh2D& mesh, int t);
double triangle_diameter(const Mesh2D& mesh, int t);
Vec2 triangle_centroid(const Mesh2D& mesh, int t);
// Gradients of the barycentric coordinates of triangle t (one column per vertex).
Eigen::Matrix<double, 2, 3> barycentric_gradients(const Mesh2D& mesh, int t);

// max over elements of diam(T)^2 / |T|
double shape_regularity(const Mesh2D& mesh);

// Throws StructuralError for non-positive orientation, edges shared by more than
// two triangles, or hanging nodes at edge midpoints.
void check_conforming(const Mesh2D& mesh);

Mesh2D refine_nvb(const Mesh2D& mesh, const std::vector<int>& marked);

// Sub-mesh of all triangles with the given region tag. vertex_map[i] is the parent
// index of local vertex i.
struct SubMesh {
    Mesh2D mesh;
    std::vector<int> vertex_map;
    std::vector<int> triangle_map;
};
SubMesh submesh(const Mesh2D& mesh, Region region);

using Edge = std::array<int, 2>;  // sorted (lo, hi)

// Adjacency built once per mesh. Global edge normals point to the right of lo->hi.
struct MeshTopology {
    std::vector<Edge> edges;
    std::vector<std::array<int, 3>> triangle_edges;  // local edge i is opposite local vertex i
    std::vector<std::array<int, 2>> edge_triangles;  // second entry -1 on the boundary
    std::vector<std::vector<int>> vertex_triangles;

    int find_edge(int a, int b) const;
    bool is_boundary_edge(int e) const { return edge_triangles[e][1] < 0; }
};
MeshTopology build_topology(const Mesh2D& mesh);

// Closed polygon; segment i runs from point i to point (i+1) mod n.
// The domain lies to the left, the exterior normal to the right.
struct BoundaryMesh {
    std::vector<Vec2> points;
    std::vector<int> node_vertex;  // mesh vertex per point, -1 if not a mesh vertex
    std::vector<int> parent;       // parent triangle per segment, -1 if unknown

    std::size_t size() const { return points.size(); }
    int next(int i) const { return (i + 1) % static_cast<int>(points.size()); }
    int prev(int i) const { return (i + static_cast<int>(points.size()) - 1) % static_cast<int>(points.size()); }
    Vec2 start(int i) const { return points[i]; }
    Vec2 end(int i) const { return points[next(i)]; }
    double length(int i) const { return (end(i) - start(i)).norm(); }
    Vec2 tangent(int i) const { return (end(i) - start(i)).normalized(); }
    Vec2 normal(int i) const {
        Vec2 t = tangent(i);
        return Vec2(t.y(), -t.x());
    }
    Vec2 point(int i, double s) const { return start(i) + s * (end(i) - start(i)); }
    double diameter() const;
};

// Boundary of the union of triangles tagged `region`.
BoundaryMesh boundary_mesh(const Mesh2D& mesh, Region region = Region::Interior);

// Each segment split into m equal pieces.
BoundaryMesh subdivide(const BoundaryMesh& bmesh, int m);

struct Patch {
    int seed = -1;
    int k = 1;
    std::vector<int> triangles;  // sorted
    std::vector<int> vertices;   // sorted; local index = position
};

// k-patch restricted to triangles for which `allowed` is true (empty = all).
Patch k_patch(const Mesh2D& mesh, const MeshTopology& topo, int seed, int k,
              const std::vector<char>& allowed = {});
Patch k_patch(const Mesh2D& mesh, int seed, int k);

// Barycentric value of the hat of `vertex` at `point`. Throws DomainError outside.
double hat_function_eval(const Mesh2D& mesh, int vertex, const Vec2& point);
// Triangle containing the point, -1 if none.
int locate(const Mesh2D& mesh, const Vec2& point);

// "x y" per vertex, then "i j k tag" per triangle.
void write_mesh(const Mesh2D& mesh, std::ostream& os);

// Criss-cross grid: nx*ny cells on [x0,x1]x[y0,y1], four triangles per cell around its center.
Mesh2D criss_cross(double x0, double x1, double y0, double y1, int nx, int ny);

}  // namespace fembem
