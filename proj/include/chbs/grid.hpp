// grid.hpp -- periodic slab grid (periodic in x, two flat boundary rows in y)
// with quadrature, difference operators, and the coupling bilinear form.
//
// The operators are built as a matched set: the explicit boundary closures of
// lap_bulk and the one-sided normal derivative reproduce the edge-sum
// gradient form exactly, so that for every u, v
//
//   sum_bulk w*(-lap_bulk u)*v = a_bulk(u, v) - sum_surf hx*(dn u)*(v|_rows)
//
// holds to rounding error.  Mass and energy bookkeeping of the time stepper
// relies on this identity being exact, not just consistent.
#pragma once

#include <string>

#include "chbs/pair.hpp"

namespace chbs {

struct SlabGrid {
  double lx = 1.0;  // horizontal period
  int nx = 0;       // nodes across (periodic)
  int ny = 0;       // rows, including the two boundary rows
  double hx = 0.0;
  double hy = 0.0;

  int n_bulk() const { return nx * ny; }
  int n_surf() const { return 2 * nx; }
  double omega_measure() const { return lx; }        // slab thickness is 1
  double gamma_measure() const { return 2.0 * lx; }  // two boundary curves
  int idx(int i, int j) const { return j * nx + i; }
  bool boundary_row(int j) const { return j == 0 || j == ny - 1; }
  // Trapezoid-in-y weight of a bulk node in row j.
  double bulk_weight(int j) const {
    return boundary_row(j) ? 0.5 * hx * hy : hx * hy;
  }
  double surf_weight() const { return hx; }
};

// Throws ConfigError unless lx > 0, nx >= 4 and even, ny >= 3.
SlabGrid build_grid(double lx, int nx, int ny);

// Quadrature: trapezoid in y, rectangle in x (exact total measures).
double integrate_bulk(const SlabGrid& g, const Field& u);
double integrate_surface(const SlabGrid& g, const Field& us);

// Five-point Laplacian inside, weak-form-consistent one-sided closure on the
// two boundary rows (see header comment).
void lap_bulk(const SlabGrid& g, const Field& u, Field& out);
Field lap_bulk(const SlabGrid& g, const Field& u);

// Periodic second difference along each boundary curve.
void lap_surface(const SlabGrid& g, const Field& us, Field& out);
Field lap_surface(const SlabGrid& g, const Field& us);

// Outward normal derivative on the two boundary rows, second-order one-sided
// (exact on fields linear in y).
void normal_derivative(const SlabGrid& g, const Field& u, Field& out);
Field normal_derivative(const SlabGrid& g, const Field& u);

// Kinetic-rate coefficient of the boundary jump term: 1/L for L > 0, 0 for
// L = 0 (the jump is then absent; the trace identification takes over).
double chi(double L);

// Edge-sum gradient forms (independent of the stencil code paths above).
double a_bulk_gradient(const SlabGrid& g, const Field& u, const Field& v);
double a_surface_gradient(const SlabGrid& g, const Field& us, const Field& vs);

// Coupling form  a_bulk(y,z) + sigma*a_surf(y_G,z_G)
//              + chi(L) * sum_surf hx * (y|_row - y_G)(z|_row - z_G).
// Symmetric positive semidefinite; kernel = constant pairs.  For L = 0 both
// pairs must be trace-linked (RegimeError otherwise).
double bilinear_a(const SlabGrid& g, double L, double sigma,
                  const BulkSurfacePair& y, const BulkSurfacePair& z);

// Randomized structural self-audit (symmetry, kernel, the summation-by-parts
// identity, measures); returns a flat text report, throws nothing.  `ok` is
// set false on any violation.
struct OperatorAudit {
  bool ok = true;
  std::string text;
};
OperatorAudit operator_self_test(const SlabGrid& g, double L, double sigma,
                                 unsigned long long seed);

}  // namespace chbs
