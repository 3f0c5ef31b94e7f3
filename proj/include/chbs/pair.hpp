// pair.hpp -- bulk/surface field pair, the basic unknown of the coupled
// problem.  Bulk values are stored row-major (row j contiguous, j = 0 at the
// lower boundary); surface values hold the two boundary curves, lower row
// first.
#pragma once

#include <vector>

namespace chbs {

using Field = std::vector<double>;

// TraceLinked: the surface component is the trace of the bulk one (kept as an
// explicit, synchronized copy).  Independent: the two components are separate
// unknowns, coupled only through the model equations.
enum class Linkage { TraceLinked, Independent };

struct BulkSurfacePair {
  Field bulk;  // ny*nx values, index j*nx + i
  Field surf;  // 2*nx values, index s*nx + i with s = 0 lower row, 1 upper
  Linkage linkage = Linkage::TraceLinked;
};

}  // namespace chbs
