#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tscd {

// Error hierarchy. The CLI maps ConfigError -> exit 2,
// MissingArtifactError -> exit 3, any other Error -> exit 1.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define TSCD_DEFINE_ERROR(NAME)                           \
  struct NAME : Error {                                   \
    explicit NAME(const std::string& msg) : Error(msg) {} \
  }

TSCD_DEFINE_ERROR(MissingFileError);
TSCD_DEFINE_ERROR(ShapeMismatchError);
TSCD_DEFINE_ERROR(NonMonotoneTimestampsError);
TSCD_DEFINE_ERROR(NonFiniteValuesError);
TSCD_DEFINE_ERROR(InsufficientFramesError);
TSCD_DEFINE_ERROR(ChannelMismatchError);
TSCD_DEFINE_ERROR(InvalidArgumentError);
TSCD_DEFINE_ERROR(EmptyContextError);
TSCD_DEFINE_ERROR(NoEligiblePixelsError);
TSCD_DEFINE_ERROR(AllPixelsIgnoredError);
TSCD_DEFINE_ERROR(CheckpointError);
TSCD_DEFINE_ERROR(MissingArtifactError);
TSCD_DEFINE_ERROR(DivergenceError);

#undef TSCD_DEFINE_ERROR

struct ConfigError : Error {
  std::string key;
  explicit ConfigError(const std::string& msg, std::string k = "")
      : Error(msg), key(std::move(k)) {}
};

#define TSCD_CHECK(cond, ExcType, msg) \
  do {                                 \
    if (!(cond)) throw ExcType(msg);   \
  } while (0)

}  // namespace tscd
