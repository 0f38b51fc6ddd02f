#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hysid {

enum class ErrorKind {
  InvalidArgument,
  ConstantChannel,
  LengthMismatch,
  UnknownChannel,
  InvalidSample,
  NoSwitchObserved,
  NonFiniteValue,
  RankDeficient,
  AllTermsEliminated,
  DivergenceDetected,
  InfeasibleVariation,
  Config,
  Io,
  Format,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConstantChannel: return "ConstantChannel";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UnknownChannel: return "UnknownChannel";
    case ErrorKind::InvalidSample: return "InvalidSample";
    case ErrorKind::NoSwitchObserved: return "NoSwitchObserved";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::AllTermsEliminated: return "AllTermsEliminated";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::InfeasibleVariation: return "InfeasibleVariation";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

// Carries an error kind plus optional location details (channel, row/column,
// step) so callers can report where a pipeline stage failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  std::string channel;
  std::ptrdiff_t row = -1;
  std::ptrdiff_t col = -1;
  std::ptrdiff_t step = -1;

 private:
  ErrorKind kind_;
};

inline Error make_channel_error(ErrorKind kind, const std::string& channel, const std::string& what) {
  Error e(kind, what + " (channel '" + channel + "')");
  e.channel = channel;
  return e;
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::InvalidArgument, what);
}

}  // namespace hysid
