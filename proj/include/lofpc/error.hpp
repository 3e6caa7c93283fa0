#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lofpc {

enum class Errc {
  // input / usage
  ParseError,
  NoData,
  ConfigError,
  IndexOutOfRange,
  InvalidArgument,
  // statistical procedure
  DisconnectedGraph,
  DisconnectedSubgraph,
  EmptyRegime,
  EmptyBlock,
  NotSymmetric,
  NotPSD,
  DeltaNotCyclic,
  SigmaUnidentifiable,
  NotComplete,
  UnequalCounts,
  MTooSmall,
  SplitInvalid,
  RankDeficientDesign,
  NoResidualDf,
  RetriesExhausted,
  EmptyCandidateSet,
  NoEdge,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::ParseError: return "ParseError";
    case Errc::NoData: return "NoData";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::DisconnectedSubgraph: return "DisconnectedSubgraph";
    case Errc::EmptyRegime: return "EmptyRegime";
    case Errc::EmptyBlock: return "EmptyBlock";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::NotPSD: return "NotPSD";
    case Errc::DeltaNotCyclic: return "DeltaNotCyclic";
    case Errc::SigmaUnidentifiable: return "SigmaUnidentifiable";
    case Errc::NotComplete: return "NotComplete";
    case Errc::UnequalCounts: return "UnequalCounts";
    case Errc::MTooSmall: return "MTooSmall";
    case Errc::SplitInvalid: return "SplitInvalid";
    case Errc::RankDeficientDesign: return "RankDeficientDesign";
    case Errc::NoResidualDf: return "NoResidualDf";
    case Errc::RetriesExhausted: return "RetriesExhausted";
    case Errc::EmptyCandidateSet: return "EmptyCandidateSet";
    case Errc::NoEdge: return "NoEdge";
  }
  return "Unknown";
}

/// True for errors caused by malformed input rather than by the data failing
/// a statistical precondition.
constexpr bool is_input_error(Errc c) noexcept {
  switch (c) {
    case Errc::ParseError:
    case Errc::NoData:
    case Errc::ConfigError:
    case Errc::IndexOutOfRange:
    case Errc::InvalidArgument:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace lofpc
