#ifndef BUILDERBENCH_SCRIPTED_H_
#define BUILDERBENCH_SCRIPTED_H_

#include <optional>

#include "builderbench/protocols.h"

namespace builderbench {

// Hand-written pick-and-place controller. Targets are served in index
// order; each is filled by the nearest free cube, carried over at a safe
// height and lowered onto the target. With `hold` set the last cube is kept
// in the gripper instead of released.
//
// The controller mirrors the env's setpoint integration so it can steer the
// setpoint directly instead of chasing the lagging gripper.
class ScriptedPolicy : public Policy {
 public:
  explicit ScriptedPolicy(bool hold = false) : hold_(hold) {}

  void Reset(uint64_t seed) override;
  Action Act(const Observation& obs, std::span<const double> goal) override;

 private:
  Action MoveTo(const Vec3& desired, double finger);

  bool hold_;
  std::optional<Vec3> setpoint_;
  int pick_ = -1;
  int release_steps_ = 0;
};

}  // namespace builderbench

#endif  // BUILDERBENCH_SCRIPTED_H_
