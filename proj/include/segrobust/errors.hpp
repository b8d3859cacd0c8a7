#ifndef SEGROBUST_ERRORS_HPP
#define SEGROBUST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace segrobust {

// Broad failure class; the CLI maps it onto its exit code.
enum class ErrorCategory { Config = 1, Model = 2, Io = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define SEGROBUST_DEFINE_ERROR(Name, Base, Category)        \
  class Name : public Base {                                \
   public:                                                  \
    explicit Name(const std::string& what)                  \
        : Base(ErrorCategory::Category, what) {}            \
                                                            \
   protected:                                               \
    Name(ErrorCategory c, const std::string& what)          \
        : Base(c, what) {}                                  \
  };

SEGROBUST_DEFINE_ERROR(ConfigError, Error, Config)
SEGROBUST_DEFINE_ERROR(IoError, Error, Io)
SEGROBUST_DEFINE_ERROR(ModelError, Error, Model)

SEGROBUST_DEFINE_ERROR(EmptyMask, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(DimensionMismatch, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(AreaMismatch, DimensionMismatch, Config)
SEGROBUST_DEFINE_ERROR(DegenerateClass, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(EmptyPredictionList, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(EmptyDataset, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(UnknownKind, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(SeverityOutOfRange, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(KernelLargerThanImage, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(StepOutOfRange, ConfigError, Config)
SEGROBUST_DEFINE_ERROR(ConfigInvalid, ConfigError, Config)

SEGROBUST_DEFINE_ERROR(ParseError, IoError, Io)
SEGROBUST_DEFINE_ERROR(MissingFile, IoError, Io)

SEGROBUST_DEFINE_ERROR(NonFiniteGradient, ModelError, Model)
SEGROBUST_DEFINE_ERROR(ProtocolError, ModelError, Model)
SEGROBUST_DEFINE_ERROR(RemoteError, ModelError, Model)
SEGROBUST_DEFINE_ERROR(Timeout, ModelError, Model)

#undef SEGROBUST_DEFINE_ERROR

// Loss and metric shapes disagree; same family as DimensionMismatch.
using ShapeMismatch = DimensionMismatch;

}  // namespace segrobust

#endif  // SEGROBUST_ERRORS_HPP
