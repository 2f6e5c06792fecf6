/*
 * Copyright 2026 The GateNet Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace gatenet {

/// Root of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numeric core.
class DimensionError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class DegenerateBatchError : public Error { public: using Error::Error; };
class EmptyContextError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };

/// Raised when a gradient or loss stops being finite during training.
class TrainingDivergence : public Error {
public:
    TrainingDivergence(const std::string& what, std::string parameter = {})
        : Error(what), parameter_(std::move(parameter)) {}
    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string parameter_;
};

// Data ingestion and validation. All of these map to the "data error" exit code.
class DataError : public Error { public: using Error::Error; };
class UnsupportedFeature : public DataError { public: using DataError::DataError; };
class CorruptFile : public DataError { public: using DataError::DataError; };
class ParseError : public DataError { public: using DataError::DataError; };
class ValidationError : public DataError { public: using DataError::DataError; };
class AlignmentError : public DataError { public: using DataError::DataError; };
class PanelMismatch : public DataError { public: using DataError::DataError; };

// Configuration.
class ConfigError : public Error { public: using Error::Error; };
class SpecError : public ConfigError { public: using ConfigError::ConfigError; };

}  // namespace gatenet
