// Copyright 2026 The psd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace psd {

// Error taxonomy. The CLI maps each family onto a distinct exit code so that
// shell pipelines can tell bad input apart from numeric trouble.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad invocation or configuration (exit 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (exit 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Manifest where a speaker appears in both splits.
class SpeakerOverlapError : public DataError {
 public:
  using DataError::DataError;
};

// Peak normalization requested on a buffer with no nonzero sample.
class SilentBufferError : public DataError {
 public:
  using DataError::DataError;
};

// Utterance with no frames left to score (typically fully removed by VAD).
class EmptyUtteranceError : public DataError {
 public:
  using DataError::DataError;
};

// Numerical failure inside an estimator (exit 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace psd
