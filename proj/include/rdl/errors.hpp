#pragma once

#include <stdexcept>
#include <string>

namespace rdl {

// Base class for every library error.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// numeric core
struct ShapeMismatch : Error { using Error::Error; };
struct RankDeficient : Error { using Error::Error; };
struct NotSymmetric : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };

// autodiff
struct UnboundInput : Error { using Error::Error; };
struct NonScalarOutput : Error { using Error::Error; };
struct BackwardBeforeForward : Error { using Error::Error; };

// nn
struct IncompatibleShape : Error { using Error::Error; };
struct DegenerateShape : Error { using Error::Error; };
struct InvalidGeometry : Error { using Error::Error; };
struct InvalidInitialValue : Error { using Error::Error; };

// optim
struct MissingGradient : Error { using Error::Error; };
struct LineSearchFailed : Error { using Error::Error; };

// cli
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct MalformedCsv : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace rdl
