#pragma once

#include <stdexcept>
#include <string>

namespace fallacy {

// Base for every error raised by the library. `kind()` is the stable
// machine-readable name (used by the CLI and in tests).
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define FALLACY_DEFINE_ERROR(Name)                                        \
    class Name : public Error {                                           \
    public:                                                               \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

// taxonomy
FALLACY_DEFINE_ERROR(UnknownClass);
FALLACY_DEFINE_ERROR(ExcludedClass);
// corpus
FALLACY_DEFINE_ERROR(SchemaError);
FALLACY_DEFINE_ERROR(LabelError);
FALLACY_DEFINE_ERROR(UnmappedTechnique);
FALLACY_DEFINE_ERROR(TooFewSamples);
// augment
FALLACY_DEFINE_ERROR(ConfigError);
FALLACY_DEFINE_ERROR(EmptyClass);
FALLACY_DEFINE_ERROR(QuotaUnreachable);
FALLACY_DEFINE_ERROR(StrategyUnavailable);
// retrieval
FALLACY_DEFINE_ERROR(EncoderFailure);
FALLACY_DEFINE_ERROR(DuplicateId);
FALLACY_DEFINE_ERROR(FormatError);
// models
FALLACY_DEFINE_ERROR(ShapeMismatch);
FALLACY_DEFINE_ERROR(TooFewPrototypes);
FALLACY_DEFINE_ERROR(ArchitectureMismatch);
FALLACY_DEFINE_ERROR(TrainingFailure);
// curriculum
FALLACY_DEFINE_ERROR(MissingStageData);
// evalreport
FALLACY_DEFINE_ERROR(LengthMismatch);
FALLACY_DEFINE_ERROR(UnknownLabel);
FALLACY_DEFINE_ERROR(HeterogeneousReports);
FALLACY_DEFINE_ERROR(LabelSpaceMismatch);
// cli
FALLACY_DEFINE_ERROR(UnknownKnob);
FALLACY_DEFINE_ERROR(UnsupportedMethod);

#undef FALLACY_DEFINE_ERROR

}  // namespace fallacy
