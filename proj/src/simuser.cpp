#include "glide/simuser.hpp"

#include <algorithm>
#include <cmath>

namespace glide {

void UserModelConfig::validate() const {
  if (!(slow_speed >= 0.0 && slow_speed <= target_speed))
    throw ConfigError("user: need 0 <= slow_speed <= target_speed");
  if (!(accel > 0.0)) throw ConfigError("user.accel must be positive");
  if (!(reaction_latency >= 0.0)) throw ConfigError("user.reaction_latency must be >= 0");
  if (!(drift.stddev >= 0.0)) throw ConfigError("user.drift.std must be >= 0");
  if (!(drift.reversion > 0.0)) throw ConfigError("user.drift.reversion must be positive");
  if (!(twist_duration >= 0.0)) throw ConfigError("user.twist_duration must be >= 0");
}

RelativeDirection TwistDecider::choose(const JunctionAnnouncement& ann, Rng& rng) {
  switch (policy_.kind) {
    case PolicyKind::Scripted: {
      if (next_ >= policy_.route.size())
        throw ScriptExhausted("route has " + std::to_string(policy_.route.size()) +
                              " turns but junction " + std::to_string(next_ + 1) + " was reached");
      return policy_.route[next_++];
    }
    case PolicyKind::ToDestination: {
      ++next_;
      for (const auto& [dir, names] : ann.options)
        if (std::find(names.begin(), names.end(), policy_.destination) != names.end()) return dir;
      return ann.options.empty() ? RelativeDirection::Forward : ann.options.begin()->first;
    }
    case PolicyKind::Random: {
      ++next_;
      if (ann.options.empty()) return RelativeDirection::Forward;
      auto it = ann.options.begin();
      std::advance(it, static_cast<long>(rng.index(ann.options.size())));
      return it->first;
    }
  }
  return RelativeDirection::Forward;
}

std::optional<TorquePulse> twist_pulse(RelativeDirection dir, const UserModelConfig& cfg) {
  switch (dir) {
    case RelativeDirection::Forward: return std::nullopt;
    case RelativeDirection::Left: return TorquePulse{-cfg.twist_torque, cfg.twist_duration};
    case RelativeDirection::Right: return TorquePulse{cfg.twist_torque, cfg.twist_duration};
  }
  return std::nullopt;
}

std::optional<TorquePulse> policy_decide(TwistDecider& decider, const JunctionAnnouncement& ann,
                                         const UserModelConfig& cfg, Rng& rng) {
  return twist_pulse(decider.choose(ann, rng), cfg);
}

SimUser::SimUser(UserModelConfig cfg, Rng rng)
    : cfg_(std::move(cfg)), rng_(rng), decider_(cfg_.policy), offset_(cfg_.drift.mean) {
  cfg_.validate();
}

HandleState SimUser::tick(const UserPerception& p) {
  const double now = p.now;
  for (const auto& h : p.haptics)
    if (h.meaning == HapticMeaning::SlowDown && !slow_from_) slow_from_ = now + cfg_.reaction_latency;
  if (p.announcement) {
    if (auto pulse = policy_decide(decider_, *p.announcement, cfg_, rng_)) {
      pulse_ = *pulse;
      pulse_start_ = now + cfg_.reaction_latency;
    }
  }

  double target = cfg_.target_speed;
  if (slow_from_ && now >= *slow_from_) target = cfg_.slow_speed;
  if (cfg_.proximity_slowing && p.nearest_range && *p.nearest_range < cfg_.proximity_range)
    target = std::min(target, cfg_.slow_speed);

  if (p.brake_engaged) {
    speed_ = 0.0;
    was_braked_ = true;
    resume_at_.reset();
  } else {
    if (was_braked_) {
      was_braked_ = false;
      resume_at_ = now + cfg_.reaction_latency;
    }
    if (!resume_at_ || now >= *resume_at_) {
      resume_at_.reset();
      const double step = cfg_.accel * p.dt;
      if (speed_ < target) speed_ = std::min(target, speed_ + step);
      else speed_ = std::max(target, speed_ - step);
    }
  }

  if (cfg_.drift.stddev > 0.0) {
    const double a = std::exp(-cfg_.drift.reversion * p.dt);
    const double s = cfg_.drift.stddev * std::sqrt(1.0 - a * a);
    offset_ = cfg_.drift.mean + (offset_ - cfg_.drift.mean) * a + s * rng_.normal();
  }

  double torque = 0.0;
  if (pulse_start_ && now >= *pulse_start_) {
    if (now < *pulse_start_ + pulse_.duration - 1e-9) torque = pulse_.torque;
    else pulse_start_.reset();
  }

  return HandleState{p.brake_engaged ? 0.0 : speed_, offset_, torque};
}

}  // namespace glide
