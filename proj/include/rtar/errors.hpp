#pragma once

#include <stdexcept>
#include <string>

namespace rtar {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};
struct InvalidGroups : Error {
    explicit InvalidGroups(const std::string& msg) : Error("invalid groups: " + msg) {}
};
struct FrameCountMismatch : Error {
    explicit FrameCountMismatch(const std::string& msg) : Error("frame count mismatch: " + msg) {}
};
struct MissingWeights : Error {
    explicit MissingWeights(const std::string& key) : Error("missing weight: " + key) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error("validation error: " + msg) {}
};
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error("format error: " + msg) {}
};
struct DuplicateName : Error {
    explicit DuplicateName(const std::string& name) : Error("duplicate name: " + name) {}
};
struct InvalidArgs : Error {
    explicit InvalidArgs(const std::string& msg) : Error("invalid arguments: " + msg) {}
};
struct InvalidFrame : Error {
    explicit InvalidFrame(const std::string& msg) : Error("invalid frame: " + msg) {}
};
struct EmptyClip : Error {
    EmptyClip() : Error("empty clip") {}
};
struct EmptyInput : Error {
    EmptyInput() : Error("empty input") {}
};
struct BatchOnlyModule : Error {
    explicit BatchOnlyModule(const std::string& msg)
        : Error("batch-only module in streaming mode: " + msg) {}
};

}  // namespace rtar
