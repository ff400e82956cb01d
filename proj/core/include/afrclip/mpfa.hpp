#pragma once

#include "afrclip/mat.hpp"

namespace afrclip::mpfa {

// Multi-patch feature aggregation: stride-1 mean over the m x m neighborhood
// of each cell on the token grid. Border cells average their in-bounds
// neighbors only (count-normalized, no zero padding), so a constant grid is
// reproduced exactly and m = 1 is the identity.
//
// tokens: [N_p x D], N_p a perfect square, row-major patch order.
// m: odd, 1 <= m <= grid side.
Mat aggregate(const Mat& patch_tokens, int m);

}  // namespace afrclip::mpfa
