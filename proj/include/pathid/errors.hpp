#pragma once

#include <stdexcept>

namespace pathid {

// Input breaks a documented precondition (malformed spec, bad config field).
class validation_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Operation has no defined result for an otherwise well-formed input
// (visibility of two dark amplitudes, attribution with zero totals, ...).
class domain_error : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

} // namespace pathid
