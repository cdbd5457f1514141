/*
 * Copyright 2026 The msmatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MSMATCH_ERROR_H_
#define MSMATCH_ERROR_H_

#include <stdexcept>
#include <string>

namespace msm {

// Root of every error the library throws. The CLI maps subclasses onto
// process exit codes (see ExitCodeFor in tools/).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or width mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Zero-length sequence handed to an operation that needs at least one frame.
class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or option value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced in strict mode.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, reward or parameter during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Data-side failures. All of these map to the "data error" exit code.
class DataError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

class CorpusError : public DataError {
 public:
  using DataError::DataError;
};

class ImportError : public DataError {
 public:
  using DataError::DataError;
};

class FileError : public DataError {
 public:
  using DataError::DataError;
};

class EvaluationError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace msm

#endif  // MSMATCH_ERROR_H_
