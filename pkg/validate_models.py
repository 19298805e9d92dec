import inspect

from model_registry import get_all_models


def validate_models():
    """Validate model declarations against their constructor signatures.

    Returns:
        List of problems (empty when everything matches)
    """
    errors = []
    for entry in get_all_models():
        name = entry['name']
        sig = inspect.signature(entry['function'])
        function_params = set(sig.parameters.keys())

        model_params = entry.get('parameters', {})
        model_props = model_params.get('properties', {}) if isinstance(model_params, dict) else {}
        declared = set(model_props.keys())
        required = set(model_params.get('required', [])) if isinstance(model_params, dict) else set()

        missing_in_function = declared - function_params
        missing_in_model = {p for p, spec in sig.parameters.items()
                            if spec.default is inspect.Parameter.empty} - declared

        if missing_in_function:
            errors.append(f"{name}: declares {sorted(missing_in_function)} but the constructor doesn't accept them")
        if missing_in_model:
            errors.append(f"{name}: constructor requires {sorted(missing_in_model)} but the declaration doesn't define them")
        if required - declared:
            errors.append(f"{name}: required parameters {sorted(required - declared)} are not declared")
    return errors


if __name__ == "__main__":
    problems = validate_models()
    if problems:
        print("VALIDATION ERRORS:")
        for err in problems:
            print(err)
    else:
        print("All model declarations validated successfully.")
