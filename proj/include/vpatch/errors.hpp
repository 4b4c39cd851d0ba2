#pragma once

#include <stdexcept>
#include <string>

namespace vpatch {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// bad user-supplied configuration (grid size, empty vorticity class, ...)
struct config_error : error {
    using error::error;
};

// argument outside the closed-form domain (point outside the open disk, ...)
struct domain_error : error {
    using error::error;
};

// caller broke an API precondition (length mismatch, zero mass, ...)
struct contract_error : error {
    using error::error;
};

// kernel evaluated at a coincident pair
struct singularity_error : error {
    using error::error;
};

// mass constraint unreachable under the pointwise bound
struct infeasible_error : error {
    using error::error;
};

// an iteration failed to converge or produced an impossible state
struct numerical_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

} // namespace vpatch
