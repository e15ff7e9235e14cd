#include "octofunc/error.hpp"

namespace octofunc {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::malformed_declaration: return "MalformedDeclaration";
        case Errc::unsupported_param_kind: return "UnsupportedParamKind";
        case Errc::duplicate_name: return "DuplicateName";
        case Errc::registry_frozen: return "RegistryFrozen";
        case Errc::registry_not_frozen: return "RegistryNotFrozen";
        case Errc::unknown_function: return "UnknownFunction";
        case Errc::already_extended: return "AlreadyExtended";
        case Errc::invalid_token_id: return "InvalidTokenId";
        case Errc::shape_mismatch: return "ShapeMismatch";
        case Errc::all_masked: return "AllMasked";
        case Errc::not_scalar_loss: return "NotScalarLoss";
        case Errc::context_overflow: return "ContextOverflow";
        case Errc::empty_corpus: return "EmptyCorpus";
        case Errc::batch_too_small: return "BatchTooSmall";
        case Errc::missing_prerequisite_stage: return "MissingPrerequisiteStage";
        case Errc::vocabulary_not_extended: return "VocabularyNotExtended";
        case Errc::no_handler: return "NoHandler";
        case Errc::malformed_recorded_file: return "MalformedRecordedFile";
        case Errc::io_failure: return "IoFailure";
        case Errc::unknown_version: return "UnknownVersion";
        case Errc::invalid_config: return "InvalidConfig";
        case Errc::parse_failure: return "ParseFailure";
        case Errc::validation_failure: return "ValidationFailure";
    }
    return "Error";
}

}  // namespace octofunc
