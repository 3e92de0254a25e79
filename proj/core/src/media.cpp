#include "skillos/media.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>

namespace skillos {

namespace {

constexpr std::array kAllKinds = {MediaKind::text,     MediaKind::image, MediaKind::video, MediaKind::document,
                                  MediaKind::web,      MediaKind::data,  MediaKind::other};

bool in(std::string_view ext, std::initializer_list<std::string_view> set) {
  return std::find(set.begin(), set.end(), ext) != set.end();
}

}  // namespace

std::string_view to_string(MediaKind kind) noexcept {
  switch (kind) {
    case MediaKind::text: return "text";
    case MediaKind::image: return "image";
    case MediaKind::video: return "video";
    case MediaKind::document: return "document";
    case MediaKind::web: return "web";
    case MediaKind::data: return "data";
    case MediaKind::other: return "other";
  }
  return "other";
}

std::optional<MediaKind> parse_media_kind(std::string_view name) noexcept {
  for (const auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

MediaKind classify_media(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  if (!ext.empty()) ext.erase(0, 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (in(ext, {"txt", "md", "markdown", "rst", "tex", "log", "py", "js", "ts", "c", "h", "cc", "cpp", "hpp",
               "java", "go", "rs", "sh", "css", "toml", "ini", "cfg"}))
    return MediaKind::text;
  if (in(ext, {"csv", "tsv", "json", "jsonl", "yaml", "yml", "xml"})) return MediaKind::data;
  if (in(ext, {"png", "jpg", "jpeg", "gif", "bmp", "webp", "svg", "tif", "tiff"})) return MediaKind::image;
  if (in(ext, {"mp4", "mov", "webm", "mkv", "avi", "m4v"})) return MediaKind::video;
  if (in(ext, {"pdf", "doc", "docx", "ppt", "pptx", "xls", "xlsx", "odt", "odp", "ods", "epub"}))
    return MediaKind::document;
  if (in(ext, {"html", "htm", "xhtml"})) return MediaKind::web;
  return MediaKind::other;
}

}  // namespace skillos
