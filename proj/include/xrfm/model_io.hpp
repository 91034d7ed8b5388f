#pragma once

#include <string>
#include <vector>

#include "xrfm/tree.hpp"

namespace xrfm {

// ============================================================================
// Model persistence: single JSON document, numeric arrays as base64 of
// little-endian IEEE doubles (row-major). Format tag "xrfm/1".
// ============================================================================

void save_model(const XRFMModel& model, const std::string& path);

/// Throws FormatError on unknown version tags or malformed documents.
XRFMModel load_model(const std::string& path);

std::string model_to_string(const XRFMModel& model);
XRFMModel model_from_string(const std::string& text);

namespace detail {

std::string base64_encode(const unsigned char* data, std::size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);

std::string doubles_to_base64(const double* data, std::size_t count);
std::vector<double> base64_to_doubles(const std::string& text);

} // namespace detail

} // namespace xrfm
