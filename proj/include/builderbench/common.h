#ifndef BUILDERBENCH_COMMON_H_
#define BUILDERBENCH_COMMON_H_

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace builderbench {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Cube edge length is 0.04 m; every cube in the engine shares it.
inline constexpr double kCubeHalfExtent = 0.02;
inline constexpr double kCubeSize = 2.0 * kCubeHalfExtent;
inline constexpr double kMaxFingerWidth = 0.085;
inline constexpr double kSuccessThreshold = 0.02;

// Base class for every error raised by the library. `code()` is a stable
// identifier used by the CLI and the teleop wire protocol.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

#define BUILDERBENCH_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(#Name, what) {}      \
  }

BUILDERBENCH_DEFINE_ERROR(NonFiniteState);
BUILDERBENCH_DEFINE_ERROR(InvalidN);
BUILDERBENCH_DEFINE_ERROR(TaskTooLarge);
BUILDERBENCH_DEFINE_ERROR(EpisodeOver);
BUILDERBENCH_DEFINE_ERROR(LengthMismatch);
BUILDERBENCH_DEFINE_ERROR(ParseError);
BUILDERBENCH_DEFINE_ERROR(DimensionMismatch);
BUILDERBENCH_DEFINE_ERROR(TooLarge);
BUILDERBENCH_DEFINE_ERROR(OverlapError);
BUILDERBENCH_DEFINE_ERROR(EmptyBuffer);
BUILDERBENCH_DEFINE_ERROR(NoAttempts);
BUILDERBENCH_DEFINE_ERROR(ShapeMismatch);
BUILDERBENCH_DEFINE_ERROR(NonFiniteLoss);
BUILDERBENCH_DEFINE_ERROR(HashMismatch);
BUILDERBENCH_DEFINE_ERROR(ConfigError);

#undef BUILDERBENCH_DEFINE_ERROR

// Replay found a frame whose poses differ from the log.
class DivergenceAt : public Error {
 public:
  explicit DivergenceAt(int t)
      : Error("DivergenceAt", "replay diverged at frame t=" + std::to_string(t)),
        t_(t) {}
  int t() const { return t_; }

 private:
  int t_;
};

// 64-bit FNV-1a, used for config and parameter fingerprints.
inline uint64_t Fnv1a(std::string_view bytes, uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Rotation about +z by `yaw` radians.
inline Quat YawQuat(double yaw) { return Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ())); }

}  // namespace builderbench

#endif  // BUILDERBENCH_COMMON_H_
