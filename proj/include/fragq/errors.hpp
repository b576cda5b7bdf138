#pragma once

#include <stdexcept>
#include <string>

namespace fragq {

// Base of every library error. `error_class()` is a stable, machine-readable
// tag that the CLI prints on stderr and maps to an exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& message)
      : std::runtime_error(message), class_(std::move(error_class)) {}

  const std::string& error_class() const noexcept { return class_; }

 private:
  std::string class_;
};

#define FRAGQ_DEFINE_ERROR(Name, tag)                                   \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& message) : Error(tag, message) {}  \
  }

FRAGQ_DEFINE_ERROR(DecodeError, "decode_error");
FRAGQ_DEFINE_ERROR(EmptyClipError, "empty_clip");
FRAGQ_DEFINE_ERROR(IoError, "io_error");
FRAGQ_DEFINE_ERROR(ConfigError, "config_error");
FRAGQ_DEFINE_ERROR(UsageError, "usage_error");
FRAGQ_DEFINE_ERROR(PartitionError, "partition_error");
FRAGQ_DEFINE_ERROR(InfeasibleError, "fragment_infeasible");
FRAGQ_DEFINE_ERROR(ContractError, "contract_error");
FRAGQ_DEFINE_ERROR(DegenerateError, "degenerate_variance");
FRAGQ_DEFINE_ERROR(NonFiniteError, "non_finite");

#undef FRAGQ_DEFINE_ERROR

}  // namespace fragq
