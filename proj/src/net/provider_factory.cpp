#include "catchrel/pipeline.hpp"
#include "catchrel/remote_stt.hpp"

namespace catchrel {

std::unique_ptr<SttProvider> make_provider(const Config& config, const TranscribeRequest& request) {
  const auto kind = request.provider.value_or(config.provider);
  if (kind == "remote") {
    const auto endpoint = request.endpoint.value_or(config.provider_endpoint);
    const auto credential = request.credential_path.value_or(config.credential_path);
    SttProviderConfig pc{config.provider_id, ProviderKind::remote, endpoint, std::filesystem::path(credential), {}};
    if (endpoint.empty()) pc.endpoint.reset();
    if (credential.empty()) pc.credential_path.reset();
    validate_provider_config(pc);
    return std::make_unique<RemoteProvider>(config.provider_id, endpoint, credential);
  }
  if (kind != "offline") throw Error(ErrorCode::invalid_argument, "provider must be offline or remote");
  const auto script = request.offline_script.value_or(config.offline_script);
  if (script.empty()) {
    throw Error(ErrorCode::invalid_argument, "offline provider needs a script (offline_script in the configuration)");
  }
  return std::make_unique<OfflineProvider>(OfflineProvider::from_file(script));
}

}  // namespace catchrel
