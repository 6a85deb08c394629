#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace slick {

// Domain error carrying a stable machine-readable kind alongside the message.
// Kinds are the contract: tests and the CLI dispatch on them, messages are
// free-form for humans.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

namespace errkind {
inline constexpr const char* AuthError = "AuthError";
inline constexpr const char* TransportError = "TransportError";
inline constexpr const char* MalformedResponse = "MalformedResponse";
inline constexpr const char* CacheCorruption = "CacheCorruption";
inline constexpr const char* InvalidDistribution = "InvalidDistribution";
inline constexpr const char* InvalidRequest = "InvalidRequest";
inline constexpr const char* InsufficientDevPool = "InsufficientDevPool";
inline constexpr const char* ParseError = "ParseError";
inline constexpr const char* UnknownRelation = "UnknownRelation";
inline constexpr const char* InsufficientCategoryPool = "InsufficientCategoryPool";
inline constexpr const char* EmptyVariant = "EmptyVariant";
inline constexpr const char* MissingPrediction = "MissingPrediction";
inline constexpr const char* DuplicatePrediction = "DuplicatePrediction";
inline constexpr const char* MissingAnnotation = "MissingAnnotation";
inline constexpr const char* MissingEpoch = "MissingEpoch";
inline constexpr const char* DuplicateId = "DuplicateId";
inline constexpr const char* UnknownExample = "UnknownExample";
inline constexpr const char* RankDeficient = "RankDeficient";
inline constexpr const char* IdMismatch = "IdMismatch";
inline constexpr const char* EmptyIntersection = "EmptyIntersection";
inline constexpr const char* IoError = "IoError";
inline constexpr const char* ConfigError = "ConfigError";
inline constexpr const char* AnnotationIncomplete = "AnnotationIncomplete";
}  // namespace errkind

}  // namespace slick
