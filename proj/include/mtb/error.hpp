#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtb {

// Base for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset ingestion failed (missing/unreadable file).
struct IngestionError : Error {
  using Error::Error;
};

// A dataset record is malformed; carries the offending record index.
struct CorruptRecordError : Error {
  std::size_t record_index;
  CorruptRecordError(const std::string& msg, std::size_t index)
      : Error(msg), record_index(index) {}
};

// A subset request exceeds what a class can supply.
struct CapacityError : Error {
  int limiting_class;
  CapacityError(const std::string& msg, int cls) : Error(msg), limiting_class(cls) {}
};

// Manifest and dataset disagree (size, indices, catalog).
struct ConsistencyError : Error {
  using Error::Error;
};

// A trigger needs a synthesized asset that is not available.
struct MissingAssetError : Error {
  using Error::Error;
};

// Parallel plan cannot split the victim set over the catalog.
struct InfeasiblePartitionError : Error {
  using Error::Error;
};

// A sequential stage ran out of clean victims; carries the stage index.
struct ExhaustionError : Error {
  std::size_t stage;
  ExhaustionError(const std::string& msg, std::size_t stage_index)
      : Error(msg), stage(stage_index) {}
};

// Duplicate victim indices inside one plan stage.
struct PlanIntegrityError : Error {
  using Error::Error;
};

// Operation preconditions violated (empty dataset, bad shapes, ...).
struct PreconditionError : Error {
  using Error::Error;
};

// Checkpoint lineage does not match the requested continuation.
struct LineageError : Error {
  using Error::Error;
};

// ASR evaluation had zero evaluable samples.
struct DegenerateEvaluationError : Error {
  using Error::Error;
};

// Model architecture cannot support the requested defense.
struct UnsupportedModelError : Error {
  using Error::Error;
};

// Defense optimization diverged; carries the iteration index.
struct OptimizationError : Error {
  std::size_t iteration;
  OptimizationError(const std::string& msg, std::size_t iter) : Error(msg), iteration(iter) {}
};

// Config document violates the schema; carries the JSON path of the bad key.
struct ValidationError : Error {
  std::string json_path;
  ValidationError(const std::string& msg, std::string path)
      : Error(msg), json_path(std::move(path)) {}
};

// A pipeline stage is missing an upstream artifact; names the producing command.
struct DependencyError : Error {
  std::string required_command;
  DependencyError(const std::string& msg, std::string command)
      : Error(msg), required_command(std::move(command)) {}
};

// File system failures on report/plot emission.
struct IoError : Error {
  using Error::Error;
};

}  // namespace mtb
