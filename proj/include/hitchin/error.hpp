#pragma once

#include <stdexcept>
#include <string>

namespace hitchin {

enum class ErrorKind {
  InvalidMatrix,
  NumericalFailure,
  InvalidIndex,
  DegenerateGap,
  InvalidInput,
  BudgetExceeded,
  NotDiscreteCertificate,
  NotTransverse,
  NotInterior,
  MultipleSupports,
  Unsupported,
  InsufficientWindow,
  InsufficientScales,
  EmptyCover,
  NoChildrenFound,
  IncompleteTree,
};

inline const char* kindName(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidMatrix: return "InvalidMatrix";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::InvalidIndex: return "InvalidIndex";
    case ErrorKind::DegenerateGap: return "DegenerateGap";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::NotDiscreteCertificate: return "NotDiscreteCertificate";
    case ErrorKind::NotTransverse: return "NotTransverse";
    case ErrorKind::NotInterior: return "NotInterior";
    case ErrorKind::MultipleSupports: return "MultipleSupports";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::InsufficientWindow: return "InsufficientWindow";
    case ErrorKind::InsufficientScales: return "InsufficientScales";
    case ErrorKind::EmptyCover: return "EmptyCover";
    case ErrorKind::NoChildrenFound: return "NoChildrenFound";
    case ErrorKind::IncompleteTree: return "IncompleteTree";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(kindName(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace hitchin
