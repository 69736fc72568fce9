#pragma once

#include <array>
#include <vector>

#include "lq/mesh.hpp"

// Procedural test and corpus shapes. All closed shapes are outward oriented.
namespace lq::shapes {

// 8 vertices, 12 triangles, [0,1]^3.
TriMesh unit_cube();

// Closed surface of a union of axis-aligned voxels. Each voxel has extent
// `cell` and every voxel face is split into `subdiv` x `subdiv` quads, two
// triangles each. Voxels that touch only along an edge produce non-manifold
// edges.
TriMesh voxel_surface(const std::vector<std::array<int, 3>>& voxels, const Vec3& cell,
                      int subdiv);

// Single box [0,size] with `subdiv` quads per side and axis.
TriMesh box(const Vec3& size, int subdiv);
// L-shaped extrusion made of three voxels.
TriMesh l_bracket(const Vec3& cell, int subdiv);
// Two boxes sharing one edge (four faces meet there).
TriMesh fused_boxes(const Vec3& cell, int subdiv);

// Planar grid in z = 0 over [0,width]x[0,height].
TriMesh flat_grid(int nx, int ny, double width, double height);

// Capped cylinder along +z. Caps are triangulated with concentric rings.
TriMesh cylinder(double radius, double height, int segments, int rings, int cap_rings);

TriMesh icosphere(double radius, int subdiv);
TriMesh torus(double major, double minor, int nu, int nv);
TriMesh tetrahedron();

}  // namespace lq::shapes
