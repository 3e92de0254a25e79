#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

namespace skillos {

enum class MediaKind { text, image, video, document, web, data, other };

std::string_view to_string(MediaKind kind) noexcept;
std::optional<MediaKind> parse_media_kind(std::string_view name) noexcept;

/// Classification by file extension (case-insensitive).
MediaKind classify_media(const std::filesystem::path& path);

}  // namespace skillos
