from app.core.config import settings
print(f"Output root being used: {settings.GCINET_OUTPUT_ROOT}")
print(f"Log level: {settings.GCINET_LOG_LEVEL}")
print(f"Inference batch size: {settings.GCINET_INFERENCE_BATCH_SIZE}")
