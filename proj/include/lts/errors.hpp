#pragma once

#include <stdexcept>
#include <string>

namespace lts {

// Failure categories surfaced by the library. Each operation documents which
// of these it can raise.
enum class errc {
  non_diagonalizable,
  distinct_modulus_violated,
  modulus_on_unit_circle,
  bad_instability_index,
  not_orthonormal,
  not_schur_stable,
  unstabilizable,
  degenerate_eigenvalues,
  rank_deficient,
  singular_gram,
  overflow,
  zero_state,
  generation_failed,
  gap_violated,
  invalid_spectrum,
  dimension_mismatch,
  invalid_argument,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace lts
