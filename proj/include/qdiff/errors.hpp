#pragma once

#include <stdexcept>
#include <string>

namespace qdiff {

class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

#define QDIFF_ERROR(Name)                                                   \
    struct Name : Error {                                                   \
        explicit Name(const std::string& what) : Error(#Name, what) {}      \
    }

QDIFF_ERROR(ConfigError);
QDIFF_ERROR(DegenerateSpectrum);
QDIFF_ERROR(NonHermitianCoupling);
QDIFF_ERROR(ZeroDispersion);
QDIFF_ERROR(StripViolation);
QDIFF_ERROR(EmptyShell);
QDIFF_ERROR(MissingMeasure);
QDIFF_ERROR(ZeroEscape);
QDIFF_ERROR(NotConverged);
QDIFF_ERROR(SingularSolve);
QDIFF_ERROR(InsufficientData);
QDIFF_ERROR(QuadratureFail);
QDIFF_ERROR(NotIsolated);
QDIFF_ERROR(CurvatureUnstable);
QDIFF_ERROR(WindowOverflow);
QDIFF_ERROR(LabelGap);
QDIFF_ERROR(HypothesisViolated);
QDIFF_ERROR(QuadratureBudget);
QDIFF_ERROR(MissingSubset);
QDIFF_ERROR(ResourceCap);
QDIFF_ERROR(MissingArtifact);

#undef QDIFF_ERROR

}  // namespace qdiff
