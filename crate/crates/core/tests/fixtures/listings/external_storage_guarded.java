if(Build.VERSION.SDK_INT <= 21) {
	// Deprecated API usage
	File externalStorageDir = Environment.getExternalStorageDirectory();
}
else {
	// Recommended API usage
	File externalFilesDir = getExternalFilesDir(null);
}
