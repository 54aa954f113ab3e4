#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "mulma/channel.hpp"
#include "mulma/codebook.hpp"
#include "mulma/dlnbd.hpp"
#include "mulma/neural.hpp"
#include "mulma/precoding.hpp"

/// JSON documents for every artifact the tool writes. Matrices are stored
/// row-major, complex entries as [re, im] pairs. Loaders validate shapes and
/// invariants and throw ConfigError on malformed input.
namespace mulma::io {

inline constexpr int kFormatVersion = 1;

using nlohmann::json;

json to_json(const CMatrix& m);
CMatrix cmatrix_from_json(const json& j);
json to_json(const RMatrix& m);
RMatrix rmatrix_from_json(const json& j);

json to_json(const ChannelConfig& c);
ChannelConfig channel_config_from_json(const json& j);
json to_json(const ChannelRealization& h);
ChannelRealization channel_from_json(const json& j);

json to_json(const Codebook& cb);
Codebook codebook_from_json(const json& j);

json to_json(const PrecoderSet& p);
PrecoderSet precoders_from_json(const json& j);

json to_json(const nn::Network& net);
nn::Network network_from_json(const json& j);
json to_json(const nn::AdamState& s);
nn::AdamState adam_from_json(const json& j, const nn::Network& net);

json to_json(const DlArchitecture& a);
DlArchitecture architecture_from_json(const json& j);

/// Networks, optimiser state, loss weights, architecture and fingerprints.
json to_json(const DlSystem& sys);
/// Rebuilds a system for `channel` (and `precoders` for DL-NBD). Throws
/// ConfigError when the checkpoint was trained on a different channel or precoder.
DlSystem dl_system_from_json(const json& j, const ChannelRealization& channel, const PrecoderSet* precoders);

json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);

}  // namespace mulma::io
