#pragma once

#include "cpsr/learner.hpp"

// Internals shared by the compressed learner and the uncompressed baseline;
// not part of the installed interface.
namespace cpsr::detail {

// x -> S^-1 V^T x, the compressed-history side of every operator estimate.
Vec history_coords(const SvdFactors& f, const Vec& phi_h);

// Fills c_inf, c_start, c_star, and the zero operator from the model's
// already-set svd, sigma_h, config, and c_ao map.
void finalize_model(CpsrModel& model);

}  // namespace cpsr::detail
