#pragma once

#include <stdexcept>
#include <string>

namespace optiprobe {

// Root of every error raised by the library. Subclasses name the failing stage
// so the CLI can map them to structured diagnostics.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

#define OPTIPROBE_DEFINE_ERROR(Name, Kind)                         \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(what) {}        \
    const char* kind() const noexcept override { return Kind; }    \
  };

OPTIPROBE_DEFINE_ERROR(IoError, "io")
OPTIPROBE_DEFINE_ERROR(ParseError, "parse")
OPTIPROBE_DEFINE_ERROR(ArgumentError, "argument")
OPTIPROBE_DEFINE_ERROR(VocabularyError, "vocabulary")
OPTIPROBE_DEFINE_ERROR(OverlapError, "overlap")
OPTIPROBE_DEFINE_ERROR(FitError, "fit")
OPTIPROBE_DEFINE_ERROR(LookupError, "lookup")
OPTIPROBE_DEFINE_ERROR(CheckpointError, "checkpoint")
OPTIPROBE_DEFINE_ERROR(RenderError, "render")
OPTIPROBE_DEFINE_ERROR(TrainingError, "training")
OPTIPROBE_DEFINE_ERROR(SearchError, "search")
OPTIPROBE_DEFINE_ERROR(PartitionError, "partition")
OPTIPROBE_DEFINE_ERROR(ComparisonError, "comparison")
OPTIPROBE_DEFINE_ERROR(ManifestError, "manifest")

#undef OPTIPROBE_DEFINE_ERROR

}  // namespace optiprobe
