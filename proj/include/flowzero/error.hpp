// Copyright 2026 The FlowZero Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace flowzero {

/// Base of every error thrown by the library. `kind()` is a stable short
/// name used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define FLOWZERO_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

// scene syntax
FLOWZERO_DEFINE_ERROR(SyntaxError);
FLOWZERO_DEFINE_ERROR(SchemaError);
FLOWZERO_DEFINE_ERROR(RangeError);
FLOWZERO_DEFINE_ERROR(NotFound);

// llm
FLOWZERO_DEFINE_ERROR(TransportError);
FLOWZERO_DEFINE_ERROR(AuthError);
FLOWZERO_DEFINE_ERROR(RequestError);
FLOWZERO_DEFINE_ERROR(ScriptExhausted);
FLOWZERO_DEFINE_ERROR(ReplayMismatch);
FLOWZERO_DEFINE_ERROR(MissingBinding);
FLOWZERO_DEFINE_ERROR(TemplateError);
FLOWZERO_DEFINE_ERROR(ConfigError);

// verify / refine
FLOWZERO_DEFINE_ERROR(InsufficientTrack);
FLOWZERO_DEFINE_ERROR(DegenerateBox);
FLOWZERO_DEFINE_ERROR(LLMFormatError);
FLOWZERO_DEFINE_ERROR(FeedbackUnparseable);

// noise
FLOWZERO_DEFINE_ERROR(RandomDirection);
FLOWZERO_DEFINE_ERROR(NonFinite);
FLOWZERO_DEFINE_ERROR(ShapeError);

// bundle
FLOWZERO_DEFINE_ERROR(IOError);
FLOWZERO_DEFINE_ERROR(FormatError);
FLOWZERO_DEFINE_ERROR(IntegrityError);
FLOWZERO_DEFINE_ERROR(ArityError);

#undef FLOWZERO_DEFINE_ERROR

}  // namespace flowzero
