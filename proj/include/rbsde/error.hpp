#pragma once

#include <stdexcept>
#include <string>

namespace rbsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define RBSDE_DEFINE_ERROR(Name)                 \
    class Name : public Error {                  \
    public:                                      \
        explicit Name(const std::string& what)   \
            : Error(#Name ": " + what) {}        \
    }

// levy_model
RBSDE_DEFINE_ERROR(DegenerateModel);
RBSDE_DEFINE_ERROR(InvalidAtom);
// teugels_basis
RBSDE_DEFINE_ERROR(RankZero);
RBSDE_DEFINE_ERROR(IndexOutOfRank);
// convex_analysis
RBSDE_DEFINE_ERROR(InvalidBarrier);
RBSDE_DEFINE_ERROR(ProxDiverged);
RBSDE_DEFINE_ERROR(EmptySubdifferential);
RBSDE_DEFINE_ERROR(InfeasibleTerminal);
// path_engine
RBSDE_DEFINE_ERROR(IndexError);
RBSDE_DEFINE_ERROR(DumpFormatError);
// rbsde_solver
RBSDE_DEFINE_ERROR(FixedPointDiverged);
RBSDE_DEFINE_ERROR(RegressionSingular);
RBSDE_DEFINE_ERROR(DomainEscape);
// pdii_fd_oracle
RBSDE_DEFINE_ERROR(CflViolation);
RBSDE_DEFINE_ERROR(BoxTooSmall);
// experiment_cli
RBSDE_DEFINE_ERROR(ConfigError);
RBSDE_DEFINE_ERROR(HashMismatch);

#undef RBSDE_DEFINE_ERROR

}  // namespace rbsde
