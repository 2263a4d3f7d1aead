// SPDX-FileCopyrightText: 2026 dpl contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "model.hpp"

namespace dpl {

/// Model checkpoint as a single JSON document. Parameters are written as
/// decimal numbers that parse back to the exact same 64-bit values.
std::string checkpoint_to_json(const ModelState& model);
ModelState checkpoint_from_json(const std::string& text);

void save_checkpoint(const ModelState& model, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace dpl
